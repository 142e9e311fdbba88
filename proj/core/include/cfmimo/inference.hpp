// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cfmimo/mdgnn.hpp"

namespace cfmimo {

/// Frozen model compiled for inference. Only retained links are stored and
/// propagated: every layer reads its input through the mask, so pruned
/// positions never influence anything and their output is zero. A dense
/// model (tau = 0) runs the same code over all links, which keeps the
/// sparse/dense timing comparison like-for-like.
class InferenceEngine {
 public:
  explicit InferenceEngine(const GnnModel& model);

  PrecoderTensor run(Task task, const ChannelTensor& h) const;

  std::size_t retained_links(Task task) const;
  std::size_t total_links(Task task) const;
  /// Multiply-adds per sample, a hardware-independent cost measure.
  double multiply_adds(Task task) const;
  bool has(Task task) const;

 private:
  struct Groups {
    std::vector<std::uint32_t> of_link;  // compact group id per retained link
    std::vector<double> inv_count;       // 1 / retained links per group
    std::size_t count() const { return inv_count.size(); }
  };
  struct Branch {
    BranchSpec spec;
    double input_scale = 1.0;
    std::vector<std::uint32_t> links;  // flat (l, k, n) index of retained links
    std::vector<double> a;             // sigmoid(W) at retained links
    Groups groups[3];                  // AP, UE, antenna axes
    std::vector<std::uint32_t> ap_of_link;
  };

  const Branch& branch(Task task) const;

  std::vector<GnnLayerParams> layers_;
  AttentionParams attention_;
  std::vector<Branch> branches_;
};

}  // namespace cfmimo
