#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ura/framing.hpp"
#include "ura/rng.hpp"

namespace ura {

/// i.i.d. Rayleigh rows: ka x m entries CN(0,1), constant over the frame.
Eigen::MatrixXcd sample_channels(Rng& rng, int ka, int m);

/// Y = sum_k x_k h_k^T + Z with Z i.i.d. CN(0, sigma2), one draw per frame.
/// rows fixes the frame length when no device transmits (all-noise Y).
Eigen::MatrixXcd transmit(const std::vector<Frame>& frames, const Eigen::MatrixXcd& h,
                          double sigma2, Rng& rng, Eigen::Index rows = -1);

/// Same superposition for raw signal columns (used by retransmission rounds).
Eigen::MatrixXcd transmit_columns(const std::vector<Eigen::VectorXcd>& xs,
                                  const Eigen::MatrixXcd& h, double sigma2, Rng& rng,
                                  Eigen::Index rows = -1);

} // namespace ura
