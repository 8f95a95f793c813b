#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "asymhash/errors.hpp"
#include "asymhash/linalg.hpp"
#include "asymhash/mlp.hpp"

namespace asymhash::detail {

// Shared core of every margin hinge sum: over the full g1 x g2 grid,
//   0.5 * [ S_ij * max(M_ij - cos, 0) + (1 - S_ij) * max(M_ij + cos, 0) ].
//
// Cosines here are raw ip/(|a||b|), unclamped: the hinge tolerates the
// stray ulp past 1, and clamping would put a fake flat spot into the
// gradient. When g1 and g2 are the same batch, pass the same buffer as d1
// and d2; each grid role accumulates separately and the self-pair's two
// contributions are each identically zero.
inline double margin_hinge_grid(const std::vector<RealVector>& g1,
                                const std::vector<RealVector>& g2, const Matrix& similar,
                                const Matrix& margins, double weight, const char* what,
                                std::vector<RealVector>* d1, std::vector<RealVector>* d2,
                                BranchHash* signature) {
  if (similar.rows() != g1.size() || similar.cols() != g2.size() ||
      margins.rows() != g1.size() || margins.cols() != g2.size()) {
    throw DimensionError(std::string(what) + ": similarity/margin grid does not match batch");
  }
  auto norms_of = [&](const std::vector<RealVector>& g) {
    RealVector norms(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      norms[i] = norm(g[i]);
      if (norms[i] == 0.0) {
        throw DegenerateVectorError(std::string(what) + ": zero-norm vector at index " +
                                    std::to_string(i));
      }
    }
    return norms;
  };
  const RealVector n1 = norms_of(g1);
  const RealVector n2 = norms_of(g2);

  double loss = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    for (std::size_t j = 0; j < g2.size(); ++j) {
      if (g1[i].size() != g2[j].size()) {
        throw DimensionError(std::string(what) + ": vector width mismatch across the grid");
      }
      const double scale = n1[i] * n2[j];
      const double c = inner_product(g1[i], g2[j]) / scale;
      const double s = similar(i, j);
      const double m = margins(i, j);

      double d_cos = 0.0;
      if (s != 0.0) {
        const bool active = m - c > 0.0;
        if (signature) signature->feed(active);
        if (active) {
          loss += 0.5 * s * (m - c);
          d_cos -= 0.5 * s;
        }
      }
      if (s != 1.0) {
        const bool active = m + c > 0.0;
        if (signature) signature->feed(active);
        if (active) {
          loss += 0.5 * (1.0 - s) * (m + c);
          d_cos += 0.5 * (1.0 - s);
        }
      }
      if (d_cos != 0.0 && (d1 || d2)) {
        const double g = weight * d_cos;
        if (d1) {
          RealVector& out = (*d1)[i];
          const double self = c / (n1[i] * n1[i]);
          for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] += g * (g2[j][k] / scale - g1[i][k] * self);
          }
        }
        if (d2) {
          RealVector& out = (*d2)[j];
          const double self = c / (n2[j] * n2[j]);
          for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] += g * (g1[i][k] / scale - g2[j][k] * self);
          }
        }
      }
    }
  }
  return loss;
}

// Quantization pull toward the nearest code: ||h - sign(h)||^2 with sign
// treated as a constant. Sign bits go into the signature because the
// target flips with the sign.
inline double quantization_term(const std::vector<RealVector>& hashes, double weight,
                                std::vector<RealVector>* d_hash, BranchHash* signature) {
  double loss = 0.0;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    for (std::size_t k = 0; k < hashes[i].size(); ++k) {
      const double h = hashes[i][k];
      const double r = h - sign_value(h);
      if (signature) signature->feed(sign_value(h) > 0.0);
      loss += r * r;
      if (d_hash) (*d_hash)[i][k] += weight * 2.0 * r;
    }
  }
  return loss;
}

// ||logits - targets||^2 over the batch.
inline double classification_term(const std::vector<RealVector>& logits,
                                  const std::vector<LabelVector>& labels, double weight,
                                  std::vector<RealVector>* d_logits) {
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i].size() != labels[i].size()) {
      throw DimensionError("classification term: logits width does not match label width");
    }
    for (std::size_t k = 0; k < logits[i].size(); ++k) {
      const double r = logits[i][k] - static_cast<double>(labels[i][k]);
      loss += r * r;
      if (d_logits) (*d_logits)[i][k] += weight * 2.0 * r;
    }
  }
  return loss;
}

}  // namespace asymhash::detail
