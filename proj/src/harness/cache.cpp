#include "kq/harness/cache.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "kq/numerics.hpp"

namespace kq::harness {

using nlohmann::json;

namespace {

std::uint64_t checksum(const std::vector<double>& re, const std::vector<double>& im) {
  std::vector<unsigned char> bytes;
  bytes.reserve(16 * re.size());
  auto put = [&](double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(u >> (8 * b)));
  };
  for (double v : re) put(v);
  for (double v : im) put(v);
  return fnv1a(bytes);
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

GramCache::GramCache(std::filesystem::path root, std::ostream* log) : root_(std::move(root)), log_(log) {}

void GramCache::warn(const std::string& msg) const {
  if (log_) *log_ << "warning: gram cache: " << msg << '\n';
}

std::string GramCache::descriptor(const Model& model, const Potential& phi, int k) {
  return "hilb|" + phi.label() + "|k=" + std::to_string(k) + "|" + model.signature();
}

std::filesystem::path GramCache::path_for(const std::string& d) const { return root_ / (hex(fnv1a(d)) + ".json"); }

std::optional<GramMatrix> GramCache::load(const std::string& d) const {
  const auto path = path_for(d);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    std::ifstream in(path);
    const json j = json::parse(in);
    if (j.at("version").get<int>() != kVersion) {
      warn(path.string() + ": version mismatch, recomputing");
      return std::nullopt;
    }
    if (j.at("descriptor").get<std::string>() != d) {
      warn(path.string() + ": descriptor collision, recomputing");
      return std::nullopt;
    }
    const int n = j.at("n").get<int>();
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.at("im").get<std::vector<double>>();
    if (n < 1 || re.size() != static_cast<std::size_t>(n) * n || im.size() != re.size() ||
        j.at("checksum").get<std::string>() != hex(checksum(re, im))) {
      warn(path.string() + ": checksum mismatch, recomputing");
      return std::nullopt;
    }
    ComplexMatrix m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = {re[r * n + c], im[r * n + c]};
    return GramMatrix::make(j.at("k").get<int>(), std::move(m));
  } catch (const std::exception& e) {
    warn(path.string() + ": unreadable entry (" + e.what() + "), recomputing");
    return std::nullopt;
  }
}

void GramCache::store(const std::string& d, const GramMatrix& g) const {
  const int n = g.size();
  std::vector<double> re(n * n), im(n * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      re[r * n + c] = g.matrix()(r, c).real();
      im[r * n + c] = g.matrix()(r, c).imag();
    }
  const json j = {{"version", kVersion}, {"descriptor", d}, {"k", g.level()}, {"n", n},
                  {"re", re},            {"im", im},        {"checksum", hex(checksum(re, im))}};
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  const auto path = path_for(d);
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::string>{}(d) ^ reinterpret_cast<std::uintptr_t>(&g));
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump();
    if (!out) {
      warn("cannot write " + tmp.string());
      return;
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    warn("cannot rename " + tmp.string() + ": " + ec.message());
    std::filesystem::remove(tmp, ec);
  }
}

GramMatrix GramCache::get(const Model& model, const Potential& phi, int k) {
  const std::string d = descriptor(model, phi, k);
  if (enabled()) {
    if (auto g = load(d)) {
      ++hits_;
      return *g;
    }
  }
  ++misses_;
  GramMatrix g = hilb(model, power_metric(model, phi, k));
  if (enabled()) store(d, g);
  return g;
}

std::filesystem::path resolve_cache_root(const std::string& configured, const std::filesystem::path& fallback) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
  return fallback;
}

}  // namespace kq::harness
