#pragma once

#include "depthio/landmarks.hpp"
#include "geometry/mesh.hpp"
#include "retrieval/part_mask.hpp"

#include <vector>

namespace facehal::align {

struct RegistrationWeights {
  double data = 1.0;
  double smooth = 50.0;
  double landmark = 10.0;
  /// Landmark weight is multiplied by `landmark_decay` every `decay_every`
  /// outer iterations.
  double landmark_decay = 0.5;
  int decay_every = 10;
};

struct RegistrationOptions {
  RegistrationWeights weights;
  int max_iterations = 50;
  double relative_tolerance = 1e-4;
  double unmatched_mm = 15.0;
};

struct VertexMatch {
  BarycentricLocation location;
  double distance = 0.0;
  bool matched = false;
};

struct DenseCorrespondence {
  /// Template topology, deformed onto the target (G').
  TriangleMesh deformed;
  /// Closest target location per deformed vertex; `matched` is false beyond
  /// the unmatched threshold.
  std::vector<VertexMatch> matches;
  /// Energy after initialization followed by one entry per accepted step.
  std::vector<double> energy_trace;
  int iterations = 0;
  bool converged = false;
};

/// Deforms `generic` onto `target`: landmark warp initialization, then
/// iterated closest-point refinement minimizing
///   w_d * sum point-to-plane^2 + w_s * sum |edge - edge_init|^2
///   + w_l * sum |landmark - target landmark|^2.
/// Landmarks pair by name; absent ones are skipped. Each accepted step
/// lowers the energy (backtracking line search, then stiffer damping when
/// the search fails); two consecutive iterations without a decrease raise
/// NoConvergence.
DenseCorrespondence dense_correspond(const TriangleMesh& generic, const TriangleMesh& target,
                                     const depthio::LandmarkSet& generic_landmarks,
                                     const depthio::LandmarkSet& target_landmarks,
                                     const RegistrationOptions& options = {});

/// Assigns every target vertex to the parts of its nearest G' vertex, when
/// that vertex is matched and within the unmatched threshold. Returns masks
/// indexed on `target` vertices, in the same order as `generic_masks`.
retrieval::PartMasks transfer_part_masks(const retrieval::PartMasks& generic_masks,
                                         const DenseCorrespondence& correspondence,
                                         const TriangleMesh& target, double unmatched_mm = 15.0);

}  // namespace facehal::align
