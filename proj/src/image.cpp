#include "cmr/image.hpp"

#include <array>

namespace cmr {

namespace {
constexpr std::array<std::pair<SequenceKind, std::string_view>, 5> kNames{{
    {SequenceKind::bSSFP, "bSSFP"},
    {SequenceKind::LGE, "LGE"},
    {SequenceKind::T2, "T2"},
    {SequenceKind::SyntheticLGE, "SyntheticLGE"},
    {SequenceKind::SyntheticBSSFP, "SyntheticBSSFP"},
}};
} // namespace

std::string_view to_string(SequenceKind kind) {
  for (const auto &[k, name] : kNames)
    if (k == kind)
      return name;
  return "unknown";
}

SequenceKind parse_sequence(std::string_view name) {
  for (const auto &[k, n] : kNames)
    if (n == name)
      return k;
  throw InvalidArgument("unknown sequence kind '" + std::string(name) + "'");
}

void require_finite(std::span<const float> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw InvalidArgument(std::string(what) + ": non-finite value at index " +
                            std::to_string(i));
}

void require_label_codes(const LabelMap &labels) {
  const auto v = labels.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > kMaxLabel)
      throw InvalidArgument("label value " + std::to_string(v[i]) +
                            " at index " + std::to_string(i) +
                            " is outside {0,1,2,3}");
}

} // namespace cmr
