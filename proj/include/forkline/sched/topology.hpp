#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forkline {

/// Hardware layout as a rooted tree whose leaves are the cores workers run on.
///
/// The distance between two cores is the larger of the two leaf-to-lowest-
/// common-ancestor edge counts. Vertices flagged as NUMA nodes partition the
/// workers into groups (workers below no flagged vertex share group 0).
class topology {
 public:
  /// `parent[v]` is the parent vertex of v (-1 for the single root).
  /// `leaves[w]` is the vertex worker w runs on. `cpus`, when non-empty, gives
  /// the OS core id of each worker and enables pinning.
  topology(std::vector<int> parent, std::vector<int> leaves, std::vector<bool> numa, std::vector<int> cpus = {})
      : parent_(std::move(parent)), leaves_(std::move(leaves)), numa_(std::move(numa)), cpus_(std::move(cpus)) {
    validate();
    compute();
  }

  /// One NUMA node holding every core.
  static auto flat(std::size_t workers) -> topology {
    if (workers == 0) {
      throw std::invalid_argument("topology: need at least one worker");
    }
    std::vector<int> parent{-1};
    std::vector<int> leaves;
    for (std::size_t i = 0; i < workers; ++i) {
      leaves.push_back(static_cast<int>(parent.size()));
      parent.push_back(0);
    }
    std::vector<bool> numa(parent.size(), false);
    numa[0] = true;
    return {std::move(parent), std::move(leaves), std::move(numa)};
  }

  /// `nodes` NUMA nodes of `cores_per_node` cores each, below a common root.
  static auto two_level(std::size_t nodes, std::size_t cores_per_node) -> topology {
    if (nodes == 0 || cores_per_node == 0) {
      throw std::invalid_argument("topology: two-level shape needs nodes >= 1 and cores >= 1");
    }
    std::vector<int> parent{-1};
    std::vector<bool> numa{false};
    std::vector<int> leaves;
    for (std::size_t n = 0; n < nodes; ++n) {
      int const node = static_cast<int>(parent.size());
      parent.push_back(0);
      numa.push_back(true);
      for (std::size_t c = 0; c < cores_per_node; ++c) {
        leaves.push_back(static_cast<int>(parent.size()));
        parent.push_back(node);
        numa.push_back(false);
      }
    }
    return {std::move(parent), std::move(leaves), std::move(numa)};
  }

  /// Layout read from /sys (NUMA node cpulists), using the first `workers`
  /// cores in node order. Falls back to a flat layout over cpus 0..n-1 when
  /// the information is unavailable. Workers are pinned to the listed cores.
  static auto system(std::size_t workers) -> topology;

  /// Parse "flat" or "two-level:<nodes>x<cores>".
  static auto parse(std::string_view spec, std::size_t workers) -> topology {
    if (spec == "flat") {
      return flat(workers);
    }
    if (spec == "system") {
      return system(workers);
    }
    constexpr std::string_view prefix = "two-level:";
    if (spec.starts_with(prefix)) {
      auto shape = spec.substr(prefix.size());
      auto x = shape.find('x');
      std::size_t nodes = 0;
      std::size_t cores = 0;
      if (x == std::string_view::npos || !parse_uint(shape.substr(0, x), nodes) || !parse_uint(shape.substr(x + 1), cores)) {
        throw std::invalid_argument("topology: malformed two-level shape '" + std::string(spec) + "'");
      }
      auto t = two_level(nodes, cores);
      if (t.size() != workers) {
        throw std::invalid_argument("topology: two-level shape has " + std::to_string(t.size()) + " cores but " +
                                    std::to_string(workers) + " workers were requested");
      }
      return t;
    }
    throw std::invalid_argument("topology: unknown provider '" + std::string(spec) + "'");
  }

  [[nodiscard]] auto size() const noexcept -> std::size_t { return leaves_.size(); }

  [[nodiscard]] auto distance(std::size_t i, std::size_t j) const -> int { return dist_.at(i * size() + j); }

  [[nodiscard]] auto group(std::size_t worker) const -> std::size_t { return group_.at(worker); }

  [[nodiscard]] auto group_count() const noexcept -> std::size_t { return group_count_; }

  /// OS core for pinning, when this layout describes real hardware.
  [[nodiscard]] auto cpu(std::size_t worker) const -> std::optional<int> {
    if (cpus_.empty()) {
      return std::nullopt;
    }
    return cpus_.at(worker);
  }

 private:
  static auto parse_uint(std::string_view s, std::size_t& out) -> bool {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  }

  void validate() const {
    if (leaves_.empty()) {
      throw std::invalid_argument("topology: no leaves");
    }
    if (numa_.size() != parent_.size()) {
      throw std::invalid_argument("topology: numa flags must cover every vertex");
    }
    if (!cpus_.empty() && cpus_.size() != leaves_.size()) {
      throw std::invalid_argument("topology: cpu list must cover every worker");
    }
    if (std::count(parent_.begin(), parent_.end(), -1) != 1) {
      throw std::invalid_argument("topology: exactly one root required");
    }
    auto const n = static_cast<int>(parent_.size());
    for (int v = 0; v < n; ++v) {
      if (parent_[static_cast<std::size_t>(v)] >= n || parent_[static_cast<std::size_t>(v)] == v) {
        throw std::invalid_argument("topology: bad parent index");
      }
    }
    std::vector<int> seen(leaves_);
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end() || seen.front() < 0 || seen.back() >= n) {
      throw std::invalid_argument("topology: leaves must be distinct vertices");
    }
  }

  [[nodiscard]] auto depth_of(int v) const -> int {
    int d = 0;
    for (int guard = 0; parent_[static_cast<std::size_t>(v)] != -1; ++guard) {
      if (guard > static_cast<int>(parent_.size())) {
        throw std::invalid_argument("topology: parent links contain a cycle");
      }
      v = parent_[static_cast<std::size_t>(v)];
      ++d;
    }
    return d;
  }

  void compute() {
    std::size_t const p = size();
    dist_.assign(p * p, 0);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        int a = leaves_[i];
        int b = leaves_[j];
        int da = depth_of(a);
        int db = depth_of(b);
        int up_a = 0;
        int up_b = 0;
        while (da > db) {
          a = parent_[static_cast<std::size_t>(a)], --da, ++up_a;
        }
        while (db > da) {
          b = parent_[static_cast<std::size_t>(b)], --db, ++up_b;
        }
        while (a != b) {
          a = parent_[static_cast<std::size_t>(a)], ++up_a;
          b = parent_[static_cast<std::size_t>(b)], ++up_b;
        }
        dist_[i * p + j] = std::max(up_a, up_b);
      }
    }

    std::vector<int> group_of_vertex(parent_.size(), -1);
    group_.assign(p, 0);
    group_count_ = 0;
    for (std::size_t w = 0; w < p; ++w) {
      int v = leaves_[w];
      while (parent_[static_cast<std::size_t>(v)] != -1 && !numa_[static_cast<std::size_t>(v)]) {
        v = parent_[static_cast<std::size_t>(v)];
      }
      auto& g = group_of_vertex[static_cast<std::size_t>(v)];
      if (g < 0) {
        g = static_cast<int>(group_count_++);
      }
      group_[w] = static_cast<std::size_t>(g);
    }
  }

  std::vector<int> parent_;
  std::vector<int> leaves_;
  std::vector<bool> numa_;
  std::vector<int> cpus_;
  std::vector<int> dist_;
  std::vector<std::size_t> group_;
  std::size_t group_count_ = 0;
};

namespace detail {

/// Parse a Linux cpulist such as "0-3,8,10-11".
inline auto parse_cpulist(std::string_view text) -> std::vector<int> {
  std::vector<int> out;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    while (!item.empty() && (item.back() == '\n' || item.back() == ' ')) {
      item.remove_suffix(1);
    }
    if (item.empty()) {
      continue;
    }
    auto dash = item.find('-');
    int lo = 0;
    int hi = 0;
    auto a = item.substr(0, dash);
    std::from_chars(a.data(), a.data() + a.size(), lo);
    hi = lo;
    if (dash != std::string_view::npos) {
      auto b = item.substr(dash + 1);
      std::from_chars(b.data(), b.data() + b.size(), hi);
    }
    for (int c = lo; c <= hi; ++c) {
      out.push_back(c);
    }
  }
  return out;
}

} // namespace detail

inline auto topology::system(std::size_t workers) -> topology {
  if (workers == 0) {
    throw std::invalid_argument("topology: need at least one worker");
  }
  namespace fs = std::filesystem;
  std::vector<std::vector<int>> nodes;
  std::error_code ec;
  fs::path const base{"/sys/devices/system/node"};
  if (fs::is_directory(base, ec)) {
    std::vector<std::pair<int, fs::path>> dirs;
    for (auto const& entry : fs::directory_iterator(base, ec)) {
      auto name = entry.path().filename().string();
      int id = 0;
      if (name.size() > 4 && name.starts_with("node") &&
          std::from_chars(name.data() + 4, name.data() + name.size(), id).ptr == name.data() + name.size()) {
        dirs.emplace_back(id, entry.path());
      }
    }
    std::sort(dirs.begin(), dirs.end());
    for (auto const& [id, dir] : dirs) {
      std::ifstream in(dir / "cpulist");
      std::string line;
      if (std::getline(in, line)) {
        auto cpus = detail::parse_cpulist(line);
        if (!cpus.empty()) {
          nodes.push_back(std::move(cpus));
        }
      }
    }
  }

  std::vector<int> parent{-1};
  std::vector<bool> numa{false};
  std::vector<int> leaves;
  std::vector<int> cpus;
  for (auto const& node : nodes) {
    if (leaves.size() == workers) {
      break;
    }
    int const vertex = static_cast<int>(parent.size());
    parent.push_back(0);
    numa.push_back(true);
    for (int c : node) {
      if (leaves.size() == workers) {
        break;
      }
      leaves.push_back(static_cast<int>(parent.size()));
      parent.push_back(vertex);
      numa.push_back(false);
      cpus.push_back(c);
    }
  }
  if (leaves.size() < workers) {
    // Not enough described cores (or no sysfs): fall back to a flat layout
    // without pinning, since workers would share cores anyway.
    return flat(workers);
  }
  return {std::move(parent), std::move(leaves), std::move(numa), std::move(cpus)};
}

} // namespace forkline
