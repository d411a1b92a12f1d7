#include "ura/channel.hpp"

#include "ura/errors.hpp"

namespace ura {

Eigen::MatrixXcd sample_channels(Rng& rng, int ka, int m) {
    Eigen::MatrixXcd h(ka, m);
    for (int k = 0; k < ka; ++k)
        for (int j = 0; j < m; ++j) h(k, j) = rng.cnormal(1.0);
    return h;
}

Eigen::MatrixXcd transmit_columns(const std::vector<Eigen::VectorXcd>& xs,
                                  const Eigen::MatrixXcd& h, double sigma2, Rng& rng,
                                  Eigen::Index rows) {
    if (static_cast<Eigen::Index>(xs.size()) != h.rows())
        throw DimensionMismatch("transmit: " + std::to_string(xs.size()) + " signals but " +
                                std::to_string(h.rows()) + " channel rows");
    Eigen::Index l = rows;
    for (const auto& x : xs) {
        if (l < 0) l = x.size();
        if (x.size() != l) throw DimensionMismatch("transmit: signal lengths differ");
    }
    if (l < 0) throw DimensionMismatch("transmit: frame length unknown with no signals");
    const Eigen::Index m = h.cols();
    Eigen::MatrixXcd y(l, m);
    for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < m; ++j) y(i, j) = rng.cnormal(sigma2);
    for (size_t k = 0; k < xs.size(); ++k)
        y.noalias() += xs[k] * h.row(static_cast<Eigen::Index>(k));
    return y;
}

Eigen::MatrixXcd transmit(const std::vector<Frame>& frames, const Eigen::MatrixXcd& h,
                          double sigma2, Rng& rng, Eigen::Index rows) {
    std::vector<Eigen::VectorXcd> xs;
    xs.reserve(frames.size());
    for (const auto& f : frames) xs.push_back(f.x);
    return transmit_columns(xs, h, sigma2, rng, rows);
}

} // namespace ura
