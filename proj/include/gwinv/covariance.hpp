#pragma once

#include <cmath>
#include <stdexcept>

#include "gwinv/grid.hpp"

namespace gwinv {

/// Squared-exponential covariance of the Gaussian log-permeability field.
struct CovarianceModel {
    double variance = 1.0;
    double corr_len_x = 20.0;
    double corr_len_y = 20.0;
    double mean = 0.0;

    void validate() const
    {
        if (!(variance > 0.0)) throw std::invalid_argument("covariance: variance must be > 0");
        if (!(corr_len_x > 0.0) || !(corr_len_y > 0.0))
            throw std::invalid_argument("covariance: correlation lengths must be > 0");
    }

    bool operator==(const CovarianceModel&) const = default;
};

inline double covariance_eval(const CovarianceModel& model, Point p, Point q)
{
    const double ax = p.x - q.x;
    const double ay = p.y - q.y;
    return model.variance * std::exp(-(ax * ax) / (2.0 * model.corr_len_x * model.corr_len_x)
                                     - (ay * ay) / (2.0 * model.corr_len_y * model.corr_len_y));
}

} // namespace gwinv
