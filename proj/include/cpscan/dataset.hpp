#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpscan {

// Paired input/output matrices with optional ground truth. Change points are
// row indices in (0, rows()): row tau is the first row produced by the next
// model.
struct SeriesDataset {
    Eigen::MatrixXd x;  // T x p
    Eigen::MatrixXd y;  // T x h
    std::optional<std::vector<std::int64_t>> true_change_points;
    std::optional<double> noise_sigma;

    std::int64_t rows() const { return x.rows(); }
    int input_dim() const { return static_cast<int>(x.cols()); }
    int output_dim() const { return static_cast<int>(y.cols()); }

    void validate() const {
        if (x.rows() != y.rows()) throw std::invalid_argument("SeriesDataset: X/Y row mismatch");
        if (x.rows() < 1) throw std::invalid_argument("SeriesDataset: empty series");
        if (!x.allFinite() || !y.allFinite())
            throw std::invalid_argument("SeriesDataset: non-finite entries");
        if (true_change_points) {
            std::int64_t prev = 0;
            for (std::int64_t tau : *true_change_points) {
                if (tau <= prev || tau >= rows())
                    throw std::invalid_argument(
                        "SeriesDataset: change points must be strictly increasing in (0, T)");
                prev = tau;
            }
        }
        if (noise_sigma && *noise_sigma < 0)
            throw std::invalid_argument("SeriesDataset: negative noise sigma");
    }
};

}  // namespace cpscan
