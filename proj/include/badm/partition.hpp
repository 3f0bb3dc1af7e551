#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "badm/dataset.hpp"
#include "badm/errors.hpp"
#include "badm/rng.hpp"

namespace badm {

// Two-level split of {0..N-1} into B batches x S sub-batches with the
// per-cell weights alpha_bs = |cell| / N and slice weights alpha_s.
// The plan is built once and stays fixed for the whole run.
struct PartitionPlan {
  std::size_t N = 0;
  std::size_t B = 0;
  std::size_t S = 0;
  std::vector<IndexSet> cells;      // B*S, row-major (b*S + s)
  std::vector<double> alpha_bs;     // B*S, row-major
  std::vector<double> alpha_s;      // S

  const IndexSet& cell(std::size_t b, std::size_t s) const { return cells[b * S + s]; }
  double alpha(std::size_t b, std::size_t s) const { return alpha_bs[b * S + s]; }
};

// Splits N indices into B*S nonempty cells of near-equal size. With shuffle the
// index order is permuted once with rng before the contiguous split. The
// N mod (B*S) remainder samples go one per cell starting from cell (0,0) in
// row-major order.
inline PartitionPlan make_partition(std::size_t N, std::size_t B, std::size_t S, Rng& rng,
                                    bool shuffle) {
  detail::require(B >= 1 && S >= 1, "make_partition: B and S must be positive");
  detail::require(N >= B * S, "make_partition: need N >= B*S so every cell is nonempty (N=" +
                                  std::to_string(N) + ", B*S=" + std::to_string(B * S) + ")");
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) rng.shuffle(order);

  PartitionPlan plan;
  plan.N = N;
  plan.B = B;
  plan.S = S;
  std::size_t cells_total = B * S;
  std::size_t base = N / cells_total;
  std::size_t rem = N % cells_total;

  plan.cells.reserve(cells_total);
  plan.alpha_bs.resize(cells_total);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < cells_total; ++c) {
    std::size_t sz = base + (c < rem ? 1 : 0);
    std::vector<std::size_t> members(order.begin() + pos, order.begin() + pos + sz);
    pos += sz;
    std::sort(members.begin(), members.end());
    plan.cells.push_back(IndexSet{std::move(members)});
    plan.alpha_bs[c] = static_cast<double>(sz) / static_cast<double>(N);
  }

  plan.alpha_s.assign(S, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s) plan.alpha_s[s] += plan.alpha_bs[b * S + s];
  return plan;
}

// D_s: the sorted union of cell(b, s) over all batches b.
inline IndexSet slice_Ds(const PartitionPlan& plan, std::size_t s) {
  detail::require(s < plan.S, "slice_Ds: sub-batch index out of range");
  std::vector<std::size_t> merged;
  for (std::size_t b = 0; b < plan.B; ++b) {
    const auto& c = plan.cell(b, s).idx;
    merged.insert(merged.end(), c.begin(), c.end());
  }
  std::sort(merged.begin(), merged.end());
  return IndexSet{std::move(merged)};
}

}  // namespace badm
