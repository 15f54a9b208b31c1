#pragma once

#include <set>
#include <stdexcept>
#include <vector>

#include "kantorel/rational.hpp"

namespace kantorel {

inline bool is_permutation_of_range(const std::vector<Int>& a) {
  std::vector<bool> seen(a.size(), false);
  for (const auto& x : a) {
    if (x < 0 || x >= static_cast<long>(a.size())) return false;
    long i = x.convert_to<long>();
    if (seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

/// Minimal contiguous block partition of positions on which one permutation
/// rearranges into the other. Greedy left-to-right: a block closes as soon
/// as the two prefixes hold the same set of cards, which yields the unique
/// minimal decomposition.
struct BlockDecomposition {
  std::vector<std::pair<long, long>> blocks;  // [begin, end) position ranges
  std::vector<long> block_of_card;            // card -> block index
  std::vector<long> card_block_size;          // card -> size of its block

  long block_size(long card) const { return card_block_size[card]; }
};

inline BlockDecomposition block_decomposition(const std::vector<Int>& a,
                                              const std::vector<Int>& b) {
  if (a.size() != b.size() || !is_permutation_of_range(a) ||
      !is_permutation_of_range(b))
    throw std::runtime_error("block decomposition requires two permutations");
  const long n = static_cast<long>(a.size());
  BlockDecomposition bd;
  bd.block_of_card.assign(n, -1);
  bd.card_block_size.assign(n, 0);
  std::set<Int> in_a, in_b;
  long start = 0;
  for (long i = 0; i < n; ++i) {
    in_a.insert(a[i]);
    in_b.insert(b[i]);
    if (in_a == in_b) {
      bd.blocks.emplace_back(start, i + 1);
      long blk = static_cast<long>(bd.blocks.size()) - 1;
      for (long j = start; j <= i; ++j) {
        long card = a[j].convert_to<long>();
        bd.block_of_card[card] = blk;
        bd.card_block_size[card] = i + 1 - start;
      }
      in_a.clear();
      in_b.clear();
      start = i + 1;
    }
  }
  return bd;
}

/// Block-decomposition distance: (1/N^2) * sum over cards of
/// (size of the card's block - 1). Zero iff the permutations are equal.
inline Rat block_distance(const std::vector<Int>& a, const std::vector<Int>& b) {
  if (a.empty()) return Rat(0);
  BlockDecomposition bd = block_decomposition(a, b);
  Int total = 0;
  for (long sz : bd.card_block_size) total += sz - 1;
  return Rat(total, Int(a.size()) * Int(a.size()));
}

}  // namespace kantorel
