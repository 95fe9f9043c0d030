#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "odin/error.hpp"

namespace odin {

struct Roi {
  std::string id;
  std::string hemisphere;
  std::string lobe;
  bool operator==(const Roi&) const = default;
};

/// Node metadata. Row order defines node index 0..V-1.
class Atlas {
 public:
  Atlas() = default;

  explicit Atlas(std::vector<Roi> rois) : rois_(std::move(rois)) {
    require(rois_.size() >= 3, Errc::degenerate_atlas, "atlas needs at least 3 ROIs");
    std::set<std::string> ids, hemis, lobes;
    for (const auto& r : rois_) {
      require(!r.id.empty() && !r.hemisphere.empty() && !r.lobe.empty(), Errc::malformed,
              "atlas row has an empty field");
      require(ids.insert(r.id).second, Errc::duplicate_id, "duplicate ROI id '" + r.id + "'");
      hemis.insert(r.hemisphere);
      lobes.insert(r.lobe);
    }
    require(hemis.size() >= 2 || lobes.size() >= 2, Errc::degenerate_atlas,
            "atlas needs two distinct hemisphere or lobe labels");
  }

  std::size_t size() const { return rois_.size(); }
  const Roi& operator[](std::size_t i) const { return rois_[i]; }
  const std::vector<Roi>& rois() const { return rois_; }

  bool operator==(const Atlas&) const = default;

 private:
  std::vector<Roi> rois_;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

inline Atlas read_atlas(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::malformed, "atlas file is empty");
  detail::strip_cr(line);
  require(detail::split(line, '\t') == std::vector<std::string>{"roi_id", "hemisphere", "lobe"},
          Errc::malformed, "atlas header must be 'roi_id<TAB>hemisphere<TAB>lobe'");
  std::vector<Roi> rois;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split(line, '\t');
    require(f.size() == 3, Errc::malformed,
            "atlas line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    rois.push_back({f[0], f[1], f[2]});
  }
  return Atlas(std::move(rois));
}

inline Atlas read_atlas(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open atlas file '" + path + "'");
  return read_atlas(in);
}

inline void write_atlas(const Atlas& atlas, std::ostream& out) {
  out << "roi_id\themisphere\tlobe\n";
  for (const auto& r : atlas.rois()) out << r.id << '\t' << r.hemisphere << '\t' << r.lobe << '\n';
}

inline void write_atlas(const Atlas& atlas, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write atlas file '" + path + "'");
  write_atlas(atlas, out);
}

}  // namespace odin
