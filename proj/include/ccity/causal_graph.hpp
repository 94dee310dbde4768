#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ccity {

struct CausalEdge {
  std::string leader;
  std::string follower;

  friend auto operator<=>(const CausalEdge&, const CausalEdge&) = default;
};

// Directed leader -> follower graph. Ground truth and discovered graphs share
// this type.
struct CausalGraph {
  std::vector<std::string> nodes;  // sorted
  std::set<CausalEdge> edges;

  bool has_edge(const std::string& leader, const std::string& follower) const {
    return edges.contains({leader, follower});
  }

  friend bool operator==(const CausalGraph&, const CausalGraph&) = default;
};

}  // namespace ccity
