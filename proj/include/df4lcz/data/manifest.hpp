#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "df4lcz/errors.hpp"

namespace df4lcz {

enum class Split { unassigned, train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: break;
  }
  return "";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s.empty()) return Split::unassigned;
  throw FormatError("unknown split '" + s + "'");
}

/// One image-patch pair. Paths are relative to the manifest's directory; an
/// empty mask_path means no instances were segmented.
struct SampleRecord {
  std::string sample_id;
  std::string city;
  int lcz_class = 0;
  std::string polygon_id;
  std::string sentinel_path;
  std::string google_path;
  std::string mask_path;
  Split split = Split::unassigned;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline nlohmann::ordered_json to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["city"] = r.city;
  j["lcz_class"] = r.lcz_class;
  j["polygon_id"] = r.polygon_id;
  j["sentinel_path"] = r.sentinel_path;
  j["google_path"] = r.google_path;
  j["mask_path"] = r.mask_path;
  j["split"] = to_string(r.split);
  return j;
}

inline SampleRecord sample_record_from_json(const nlohmann::json& j, std::size_t classes = 17) {
  static const std::set<std::string> fields{"sample_id",   "city",        "lcz_class", "polygon_id",
                                            "sentinel_path", "google_path", "mask_path", "split"};
  for (const auto& [k, v] : j.items()) {
    if (!fields.count(k)) throw FormatError("manifest: unknown field '" + k + "'");
  }
  SampleRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.city = j.at("city").get<std::string>();
    r.lcz_class = j.at("lcz_class").get<int>();
    r.polygon_id = j.at("polygon_id").get<std::string>();
    r.sentinel_path = j.at("sentinel_path").get<std::string>();
    r.google_path = j.at("google_path").get<std::string>();
    r.mask_path = j.at("mask_path").get<std::string>();
    r.split = parse_split(j.at("split").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (r.sample_id.empty()) throw FormatError("manifest: empty sample_id");
  if (r.lcz_class < 0 || static_cast<std::size_t>(r.lcz_class) >= classes) {
    throw FormatError("manifest: sample " + r.sample_id + " has lcz_class " + std::to_string(r.lcz_class) +
                      " outside [0," + std::to_string(classes) + ")");
  }
  return r;
}

inline void sort_by_id(std::vector<SampleRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
}

/// JSON lines, one record per line, in the order given.
inline void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw InputError("write failed: " + path.string());
}

struct ManifestOptions {
  std::size_t classes = 17;
  /// Require every referenced file to exist.
  bool check_paths = true;
};

inline std::vector<SampleRecord> read_manifest(const std::filesystem::path& path, const ManifestOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open manifest " + path.string());
  std::vector<SampleRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  const auto base = path.parent_path();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto r = sample_record_from_json(j, opt.classes);
    if (!ids.insert(r.sample_id).second) throw FormatError("manifest: duplicate sample_id " + r.sample_id);
    if (opt.check_paths) {
      for (const auto* p : {&r.sentinel_path, &r.google_path, &r.mask_path}) {
        if (p == &r.mask_path && p->empty()) continue;
        if (p->empty() || !std::filesystem::exists(base / *p)) {
          throw InputError("manifest: sample " + r.sample_id + " references missing file '" + *p + "'");
        }
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace df4lcz
