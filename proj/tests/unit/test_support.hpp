#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pers16/item_bank.hpp"
#include "pers16/scoring.hpp"

namespace pers16::testing {

inline std::filesystem::path data_dir() { return PERS16_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return PERS16_FIXTURE_DIR; }

inline const ItemBank& reference_bank() {
  static const ItemBank bank = load_bank(data_dir() / "reference_bank.json");
  return bank;
}

inline json reference_bank_json() {
  std::ifstream in(data_dir() / "reference_bank.json");
  return json::parse(in);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pers16_test_" + std::to_string(rd()) + "_" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline TraitProfile make_profile(const std::string& model, Condition c, const TraitMap<double>& means,
                                 const std::string& digest = "d") {
  TraitProfile p;
  p.model_id = model;
  p.condition = c;
  p.bank_digest = digest;
  p.manifest_ref = "run-" + model;
  for (auto t : kAllTraits) {
    p.scores[t].trait = t;
    p.scores[t].mean = means[t];
    p.scores[t].n = 10;
  }
  return p;
}

}  // namespace pers16::testing
