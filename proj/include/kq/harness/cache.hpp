#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "kq/quantization.hpp"

namespace kq::harness {

/// Environment variable naming the default cache root.
inline constexpr const char* kCacheEnv = "KQ_CACHE_DIR";

/// On-disk store of Hilb Gram matrices keyed by (potential, k, grid signature).
/// Entries are JSON with a format version and an FNV-1a checksum over the
/// little-endian bytes of the matrix entries; writes go through a temp file
/// and an atomic rename.
class GramCache {
 public:
  static constexpr int kVersion = 1;

  /// `root` empty disables the cache. Warnings go to `log` (may be null).
  GramCache(std::filesystem::path root, std::ostream* log);

  bool enabled() const { return !root_.empty(); }
  const std::filesystem::path& root() const { return root_; }

  /// Canonical descriptor used as the key.
  static std::string descriptor(const Model& model, const Potential& phi, int k);
  std::filesystem::path path_for(const std::string& descriptor) const;

  /// Cached Hilb(h_ref^k e^{-k phi}) or computes and stores it.
  GramMatrix get(const Model& model, const Potential& phi, int k);

  std::optional<GramMatrix> load(const std::string& descriptor) const;
  void store(const std::string& descriptor, const GramMatrix& g) const;

  int hits() const { return hits_; }
  int misses() const { return misses_; }

 private:
  void warn(const std::string& msg) const;

  std::filesystem::path root_;
  std::ostream* log_;
  int hits_ = 0;
  int misses_ = 0;
};

/// Cache root for a config value: explicit dir, else $KQ_CACHE_DIR, else fallback.
std::filesystem::path resolve_cache_root(const std::string& configured, const std::filesystem::path& fallback);

}  // namespace kq::harness
