#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "addidec/errors.hpp"

namespace addidec {

// Contiguous partition of latent indices {0,...,d_z-1}. Blocks are kept in
// index order; contiguity is an invariant (the general index-set partitions
// used by the tree-metric partition search live in free functions below and
// are plain block lists, not Partition values).
struct Partition {
  std::vector<std::vector<int>> blocks;
  int d_z = 0;

  Partition() = default;
  Partition(std::vector<std::vector<int>> b, int d) : blocks(std::move(b)), d_z(d) {
    validate();
  }

  static Partition singletons(int d) {
    std::vector<std::vector<int>> b;
    for (int i = 0; i < d; ++i) b.push_back({i});
    return Partition(std::move(b), d);
  }

  // contiguous blocks of equal size
  static Partition contiguous(int d, int block_size) {
    if (block_size <= 0 || d % block_size != 0)
      throw PreconditionError("block size must divide d_z");
    std::vector<std::vector<int>> b;
    for (int lo = 0; lo < d; lo += block_size) {
      std::vector<int> blk;
      for (int i = lo; i < lo + block_size; ++i) blk.push_back(i);
      b.push_back(std::move(blk));
    }
    return Partition(std::move(b), d);
  }

  std::size_t block_count() const { return blocks.size(); }

  int block_of(int index) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (int i : blocks[b])
        if (i == index) return static_cast<int>(b);
    throw PreconditionError("index outside partition");
  }

  void validate() const {
    std::vector<int> seen(static_cast<std::size_t>(d_z), 0);
    int expect = 0;
    for (const auto& blk : blocks) {
      if (blk.empty()) throw PreconditionError("empty partition block");
      for (int i : blk) {
        if (i != expect++) throw PreconditionError("partition blocks must be contiguous and ordered");
        if (i < 0 || i >= d_z || seen[static_cast<std::size_t>(i)]++)
          throw PreconditionError("partition does not cover indices exactly once");
      }
    }
    if (expect != d_z) throw PreconditionError("partition must cover all indices");
  }
};

namespace detail {
inline void assignments_rec(const std::vector<std::size_t>& sizes,
                            std::vector<int>& cur, std::vector<bool>& used,
                            std::vector<std::vector<int>>& out) {
  const std::size_t b = cur.size();
  if (b == sizes.size()) {
    out.push_back(cur);
    return;
  }
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    if (used[t] || sizes[t] != sizes[b]) continue;
    used[t] = true;
    cur.push_back(static_cast<int>(t));
    assignments_rec(sizes, cur, used, out);
    cur.pop_back();
    used[t] = false;
  }
}
}  // namespace detail

// All bijections between blocks of equal size: assignment[b] = target block.
// Generated in lexicographic order, so the identity comes first when present.
inline std::vector<std::vector<int>> enumerate_block_assignments(const Partition& p) {
  std::vector<std::size_t> sizes;
  for (const auto& b : p.blocks) sizes.push_back(b.size());
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::vector<bool> used(sizes.size(), false);
  detail::assignments_rec(sizes, cur, used, out);
  return out;
}

// Full index-level permutations that respect the partition: every block maps
// onto a block of equal size, in any within-block order. perm[i] = image of i.
inline std::vector<std::vector<int>> enumerate_full_permutations(const Partition& p) {
  std::vector<std::vector<int>> out;
  for (const auto& assign : enumerate_block_assignments(p)) {
    // within-block orderings, one per block, combined odometer-style
    std::vector<std::vector<int>> tgt(p.blocks.size());
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      tgt[b] = p.blocks[static_cast<std::size_t>(assign[b])];
      std::sort(tgt[b].begin(), tgt[b].end());
    }
    std::vector<bool> more(p.blocks.size(), true);
    while (true) {
      std::vector<int> perm(static_cast<std::size_t>(p.d_z));
      for (std::size_t b = 0; b < p.blocks.size(); ++b)
        for (std::size_t k = 0; k < p.blocks[b].size(); ++k)
          perm[static_cast<std::size_t>(p.blocks[b][k])] = tgt[b][k];
      out.push_back(std::move(perm));
      std::size_t b = 0;
      while (b < tgt.size() && !std::next_permutation(tgt[b].begin(), tgt[b].end())) ++b;
      if (b == tgt.size()) break;
    }
  }
  return out;
}

// All partitions of {0..d-1} into blocks of size block_size, as index sets
// (not necessarily contiguous); canonical order by smallest element.
inline std::vector<std::vector<std::vector<int>>> equal_size_partitions(int d, int block_size) {
  if (block_size <= 0 || d % block_size != 0)
    throw PreconditionError("block size must divide d_z");
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> cur;
  std::vector<int> pool;
  for (int i = 0; i < d; ++i) pool.push_back(i);

  struct Rec {
    int bs;
    std::vector<std::vector<std::vector<int>>>& out;
    std::vector<std::vector<int>>& cur;
    void run(std::vector<int>& rest) {
      if (rest.empty()) {
        out.push_back(cur);
        return;
      }
      // anchor on the smallest remaining index, choose its block-mates
      int anchor = rest[0];
      std::vector<int> others(rest.begin() + 1, rest.end());
      std::vector<int> pick(static_cast<std::size_t>(bs - 1));
      choose(others, 0, 0, pick, anchor, rest);
    }
    void choose(const std::vector<int>& others, std::size_t from, int got,
                std::vector<int>& pick, int anchor, std::vector<int>& rest) {
      if (got == bs - 1) {
        std::vector<int> blk{anchor};
        blk.insert(blk.end(), pick.begin(), pick.end());
        std::vector<int> next;
        for (int i : rest)
          if (std::find(blk.begin(), blk.end(), i) == blk.end()) next.push_back(i);
        cur.push_back(blk);
        run(next);
        cur.pop_back();
        return;
      }
      for (std::size_t k = from; k < others.size(); ++k) {
        pick[static_cast<std::size_t>(got)] = others[k];
        choose(others, k + 1, got + 1, pick, anchor, rest);
      }
    }
  } rec{block_size, out, cur};
  rec.run(pool);
  return out;
}

inline std::string permutation_to_string(const std::vector<int>& perm) {
  std::string s;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (i) s += ";";
    s += std::to_string(i) + "->" + std::to_string(perm[i]);
  }
  return s;
}

}  // namespace addidec
