#pragma once
// Domain types for hierarchical multi-attribute time series, CSV persistence,
// and attribute transforms.
//
// File format: UTF-8 CSV with header row `i,j,k,t,<attr1>,...,<attrv>`.
// Missing values are empty fields. Doubles are written in shortest
// round-trip form, so save -> load reproduces every value exactly.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace cleanbench {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Identifiers and containers
// ---------------------------------------------------------------------------

// Three-layer network address (e.g. controller / tower / sector). `instance`
// distinguishes repeated bootstrap draws of the same node within a sampled
// dataset; it is 0 for source datasets and is not serialized.
struct NodeId {
  int i = 0;
  int j = 0;
  int k = 0;
  int instance = 0;

  auto operator<=>(const NodeId&) const = default;
};

struct Observation {
  std::int64_t t = 0;
  std::vector<std::optional<double>> values;  // absent = missing

  bool operator==(const Observation&) const = default;
};

struct TimeSeries {
  NodeId node;
  std::vector<Observation> observations;  // strictly increasing t

  std::size_t length() const { return observations.size(); }
  bool operator==(const TimeSeries&) const = default;
};

enum class Role { Dirty, Ideal, SampledDirty, SampledIdeal, Treated };

struct Dataset {
  std::vector<TimeSeries> series;
  std::vector<std::string> attribute_names;
  Role role = Role::Dirty;

  std::size_t width() const { return attribute_names.size(); }

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& s : series) n += s.length() * width();
    return n;
  }

  // Content equality; the role tag is bookkeeping and not compared.
  bool operator==(const Dataset& o) const {
    return series == o.series && attribute_names == o.attribute_names;
  }
};

inline Dataset subset_series(const Dataset& ds, std::span<const std::size_t> indices,
                             Role role) {
  Dataset out;
  out.attribute_names = ds.attribute_names;
  out.role = role;
  out.series.reserve(indices.size());
  for (std::size_t idx : indices) out.series.push_back(ds.series[idx]);
  return out;
}

// ---------------------------------------------------------------------------
// Cell addressing
// ---------------------------------------------------------------------------

struct CellRef {
  std::size_t series = 0;
  std::size_t obs = 0;  // position within the series (not the time value)
  std::size_t attr = 0;
};

// Bit set shaped like a dataset: one flag per (series, observation, attribute).
class CellMask {
 public:
  CellMask() = default;

  explicit CellMask(const Dataset& ds) : width_(ds.width()) {
    offsets_.reserve(ds.series.size() + 1);
    std::size_t total = 0;
    for (const auto& s : ds.series) {
      offsets_.push_back(total);
      total += s.length() * width_;
    }
    offsets_.push_back(total);
    bits_.assign(total, 0);
  }

  std::size_t width() const { return width_; }
  std::size_t series_count() const {
    return offsets_.empty() ? 0 : offsets_.size() - 1;
  }

  void set(std::size_t series, std::size_t obs, std::size_t attr, bool on = true) {
    bits_[index(series, obs, attr)] = on ? 1 : 0;
  }

  bool test(std::size_t series, std::size_t obs, std::size_t attr) const {
    return bits_[index(series, obs, attr)] != 0;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  std::size_t count_in_series(std::size_t series) const {
    std::size_t n = 0;
    for (std::size_t p = offsets_[series]; p < offsets_[series + 1]; ++p)
      n += bits_[p];
    return n;
  }

  bool empty() const { return bits_.empty(); }

  CellMask& operator|=(const CellMask& o) {
    for (std::size_t p = 0; p < bits_.size(); ++p) bits_[p] |= o.bits_[p];
    return *this;
  }

 private:
  std::size_t index(std::size_t series, std::size_t obs, std::size_t attr) const {
    return offsets_[series] + obs * width_ + attr;
  }

  std::vector<std::size_t> offsets_;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// ---------------------------------------------------------------------------
// Number formatting (shortest round-trip text)
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline bool parse_int(std::string_view field, std::int64_t& out) {
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

inline bool parse_finite_double(std::string_view field, double& out) {
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size() &&
         std::isfinite(out);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV ingestion / persistence
// ---------------------------------------------------------------------------

// Loads `i,j,k,t,attr...` rows. Series appear in first-occurrence order and
// observations are sorted by t. Duplicate (node, t) rows and malformed rows
// are errors; the row error names the offending line.
inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": no data rows");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = detail::split_csv_line(line);
  if (header.size() < 5 || header[0] != "i" || header[1] != "j" ||
      header[2] != "k" || header[3] != "t") {
    throw Error(path.string() + ": header must be i,j,k,t,<attribute names>");
  }

  Dataset ds;
  for (std::size_t c = 4; c < header.size(); ++c)
    ds.attribute_names.emplace_back(header[c]);
  const std::size_t v = ds.width();

  std::map<std::tuple<int, int, int>, std::size_t> series_index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto fields = detail::split_csv_line(line);
    const auto fail = [&](const char* what) -> Error {
      return Error(path.string() + ":" + std::to_string(line_no) +
                   ": malformed row (" + what + ")");
    };
    if (fields.size() != 4 + v) throw fail("wrong field count");

    std::int64_t ijk[3];
    for (int c = 0; c < 3; ++c) {
      if (!detail::parse_int(fields[c], ijk[c]) || ijk[c] < 0)
        throw fail("node id must be a non-negative integer");
    }
    std::int64_t t;
    if (!detail::parse_int(fields[3], t) || t < 0)
      throw fail("time index must be a non-negative integer");

    Observation obs;
    obs.t = t;
    obs.values.resize(v);
    for (std::size_t a = 0; a < v; ++a) {
      const auto field = fields[4 + a];
      if (field.empty()) continue;  // missing
      double x;
      if (!detail::parse_finite_double(field, x)) throw fail("bad numeric value");
      obs.values[a] = x;
    }

    const auto key = std::make_tuple(int(ijk[0]), int(ijk[1]), int(ijk[2]));
    auto [it, inserted] = series_index.try_emplace(key, ds.series.size());
    if (inserted) {
      TimeSeries s;
      s.node = {int(ijk[0]), int(ijk[1]), int(ijk[2]), 0};
      ds.series.push_back(std::move(s));
    }
    ds.series[it->second].observations.push_back(std::move(obs));
  }

  for (auto& s : ds.series) {
    std::sort(s.observations.begin(), s.observations.end(),
              [](const Observation& a, const Observation& b) { return a.t < b.t; });
    for (std::size_t o = 1; o < s.observations.size(); ++o) {
      if (s.observations[o].t == s.observations[o - 1].t) {
        throw Error(path.string() + ": duplicate time index " +
                    std::to_string(s.observations[o].t) + " for node (" +
                    std::to_string(s.node.i) + "," + std::to_string(s.node.j) +
                    "," + std::to_string(s.node.k) + ")");
      }
    }
  }
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");

  out << "i,j,k,t";
  for (const auto& name : ds.attribute_names) out << ',' << name;
  out << '\n';

  for (const auto& s : ds.series) {
    for (const auto& obs : s.observations) {
      out << s.node.i << ',' << s.node.j << ',' << s.node.k << ',' << obs.t;
      for (const auto& val : obs.values) {
        out << ',';
        if (val) out << format_double(*val);
      }
      out << '\n';
    }
  }
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Attribute transforms
// ---------------------------------------------------------------------------

enum class AttrTransform { Identity, NaturalLog };

struct Transform {
  std::vector<AttrTransform> per_attr;

  static Transform identity(std::size_t v) {
    return Transform{std::vector<AttrTransform>(v, AttrTransform::Identity)};
  }

  bool has_log() const {
    return std::any_of(per_attr.begin(), per_attr.end(),
                       [](AttrTransform t) { return t == AttrTransform::NaturalLog; });
  }
};

// Applies ln() to positive observed values on log-flagged attributes.
// Non-positive observed values pass through unchanged and are recorded in
// `untransformed` so that rule evaluation can still see them as raw values.
inline Dataset apply_transform(const Dataset& ds, const Transform& tf,
                               CellMask* untransformed = nullptr) {
  if (tf.per_attr.size() != ds.width())
    throw Error("transform width does not match dataset attributes");

  Dataset out = ds;
  if (untransformed) *untransformed = CellMask(ds);
  for (std::size_t a = 0; a < ds.width(); ++a) {
    if (tf.per_attr[a] != AttrTransform::NaturalLog) continue;
    for (std::size_t si = 0; si < out.series.size(); ++si) {
      auto& obs_list = out.series[si].observations;
      for (std::size_t o = 0; o < obs_list.size(); ++o) {
        auto& val = obs_list[o].values[a];
        if (!val) continue;
        if (*val > 0.0) {
          val = std::log(*val);
        } else if (untransformed) {
          untransformed->set(si, o, a);
        }
      }
    }
  }
  return out;
}

// Inverse of apply_transform. Cells listed in `untransformed` were never
// log-transformed and are left as stored.
inline Dataset invert_transform(const Dataset& ds, const Transform& tf,
                                const CellMask* untransformed = nullptr) {
  if (tf.per_attr.size() != ds.width())
    throw Error("transform width does not match dataset attributes");

  Dataset out = ds;
  for (std::size_t a = 0; a < ds.width(); ++a) {
    if (tf.per_attr[a] != AttrTransform::NaturalLog) continue;
    for (std::size_t si = 0; si < out.series.size(); ++si) {
      auto& obs_list = out.series[si].observations;
      for (std::size_t o = 0; o < obs_list.size(); ++o) {
        auto& val = obs_list[o].values[a];
        if (!val) continue;
        if (untransformed && untransformed->test(si, o, a)) continue;
        val = std::exp(*val);
      }
    }
  }
  return out;
}

}  // namespace cleanbench
