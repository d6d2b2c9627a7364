#ifndef SELBIAS_TESTS_RANDOM_DMG_HPP_
#define SELBIAS_TESTS_RANDOM_DMG_HPP_

#include <random>
#include <string>

#include "selbias/graph.hpp"

namespace selbias::ref {

// Random DAG on n nodes named V0..V{n-1}: edge i -> j (i < j in a random order) with probability p.
inline Dmg random_dag(std::mt19937_64& rng, int n, double p) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Dmg g;
  for (int i = 0; i < n; ++i) g.add_node("V" + std::to_string(i));
  std::bernoulli_distribution coin(p);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng)) g.add_directed(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  return g;
}

// Random DMG: each ordered pair carries a directed edge with probability p_dir,
// each unordered pair a bidirected edge with probability p_bi. Cycles allowed.
inline Dmg random_dmg(std::mt19937_64& rng, int n, double p_dir, double p_bi) {
  Dmg g;
  for (int i = 0; i < n; ++i) g.add_node("V" + std::to_string(i));
  std::bernoulli_distribution dir(p_dir), bi(p_bi);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (dir(rng)) g.add_directed(i, j);
      if (i < j && bi(rng)) g.add_bidirected(i, j);
    }
  return g;
}

}  // namespace selbias::ref

#endif  // SELBIAS_TESTS_RANDOM_DMG_HPP_
