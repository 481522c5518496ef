#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nsb {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Raised when a mathematical function receives an argument outside its domain.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Raised when a configuration violates a modelling constraint.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

inline Vec3 sgn(const Vec3& v) { return {sgn(v.x()), sgn(v.y()), sgn(v.z())}; }

/**
 * @brief Signed power |x|^p * sgn(x).
 * @throws DomainError for non-finite x or p <= 0.
 */
inline double signed_pow(double x, double p) {
    if (!std::isfinite(x) || !std::isfinite(p)) throw DomainError("signed_pow: non-finite input");
    if (p <= 0.0) throw DomainError("signed_pow: exponent must be positive");
    if (x == 0.0) return 0.0;
    if (p == 1.0) return x;
    return std::copysign(std::pow(std::abs(x), p), x);
}

inline Vec3 signed_pow(const Vec3& v, double p) {
    return {signed_pow(v.x(), p), signed_pow(v.y(), p), signed_pow(v.z(), p)};
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

// ---------------------------------------------------------------------------
// Symmetric eigenvalues via cyclic Jacobi rotations.

struct SymmetricEigen {
    VecX values;   // ascending
    MatX vectors;  // columns match values
    int sweeps = 0;
};

inline SymmetricEigen jacobi_eigen(MatX a, double tol = 1e-14, int max_sweeps = 100) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw PreconditionError("jacobi_eigen: matrix must be square");
    MatX v = MatX::Identity(n, n);
    SymmetricEigen out;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= tol * tol * std::max(1.0, a.squaredNorm())) break;
        ++out.sweeps;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = sgn(theta == 0.0 ? 1.0 : theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index l, Eigen::Index r) { return a(l, l) < a(r, r); });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto j = order[static_cast<std::size_t>(i)];
        out.values(i) = a(j, j);
        out.vectors.col(i) = v.col(j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Communication graph: undirected follower graph plus leader access weights.

class CommGraph {
public:
    CommGraph() = default;

    CommGraph(MatX adjacency, VecX leader) : a_(std::move(adjacency)), b_(std::move(leader)) {
        validate();
    }

    /// Unweighted graph from an edge list (zero-based indices) and leader set.
    static CommGraph from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                const std::vector<std::size_t>& leader_access, double weight = 1.0) {
        MatX a = MatX::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (auto [i, j] : edges) {
            if (i >= n || j >= n) throw ConfigError("graph: edge index out of range");
            if (i == j) throw ConfigError("graph: self loops are not allowed");
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weight;
            a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = weight;
        }
        VecX b = VecX::Zero(static_cast<Eigen::Index>(n));
        for (auto i : leader_access) {
            if (i >= n) throw ConfigError("graph: leader access index out of range");
            b(static_cast<Eigen::Index>(i)) = weight;
        }
        return {std::move(a), std::move(b)};
    }

    static CommGraph ring(std::size_t n, const std::vector<std::size_t>& leader_access) {
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        if (n == 2) edges.emplace_back(0, 1);
        if (n > 2)
            for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
        return from_edges(n, edges, leader_access);
    }

    std::size_t size() const { return static_cast<std::size_t>(a_.rows()); }
    double a(std::size_t i, std::size_t j) const {
        return a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    double b(std::size_t i) const { return b_(static_cast<Eigen::Index>(i)); }
    const MatX& adjacency() const { return a_; }
    const VecX& leader_weights() const { return b_; }

    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < size(); ++j)
            if (j != i && a(i, j) > 0.0) out.push_back(j);
        return out;
    }

    MatX laplacian() const {
        MatX l = -a_;
        for (Eigen::Index i = 0; i < a_.rows(); ++i) l(i, i) = a_.row(i).sum();
        return l;
    }

    MatX h_matrix() const {
        MatX h = laplacian();
        for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) += b_(i);
        return h;
    }

private:
    void validate() const {
        if (a_.rows() != a_.cols()) throw ConfigError("graph: adjacency must be square");
        if (b_.size() != a_.rows()) throw ConfigError("graph: leader weight count must equal agent count");
        if (a_.rows() == 0) throw ConfigError("graph: at least one agent is required");
        for (Eigen::Index i = 0; i < a_.rows(); ++i) {
            if (a_(i, i) != 0.0) throw ConfigError("graph: adjacency diagonal must be zero");
            if (b_(i) < 0.0) throw ConfigError("graph: leader weights must be nonnegative");
            for (Eigen::Index j = 0; j < a_.cols(); ++j) {
                if (a_(i, j) < 0.0) throw ConfigError("graph: adjacency must be nonnegative");
                if (a_(i, j) != a_(j, i)) throw ConfigError("graph: adjacency must be symmetric");
            }
        }
        if (!(b_.maxCoeff() > 0.0)) throw ConfigError("graph: no agent has access to the leader");
    }

    MatX a_;
    VecX b_;
};

struct HSpectrum {
    MatX h;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

/// H = L + B with its extreme eigenvalues; rejects graphs where H is not positive definite.
inline HSpectrum build_h_matrix(const CommGraph& g) {
    HSpectrum out;
    out.h = g.h_matrix();
    const auto eig = jacobi_eigen(out.h);
    out.lambda_min = eig.values(0);
    out.lambda_max = eig.values(eig.values.size() - 1);
    if (!(out.lambda_min > 1e-12 * std::max(1.0, out.lambda_max)))
        throw ConfigError("graph: H = L + B is not positive definite (disconnected component without leader access)");
    return out;
}

// ---------------------------------------------------------------------------
// Fixed-time settling bounds.

struct SettlingParams {
    enum class Form { TwoTerm, Bracketed };
    Form form = Form::TwoTerm;
    double eta1 = 1.0, eta2 = 1.0;
    double k1 = 2.0, k2 = 0.5;            // two-term exponents
    double k3 = 2.0, k4 = 0.5, k5 = 1.0;  // bracketed exponents
};

/**
 * Upper bound on the settling time of V' <= -eta1 V^k1 - eta2 V^k2 (two-term form)
 * or V' <= -(eta1 V^k3 + eta2 V^k4)^k5 (bracketed form).
 */
inline double fixed_time_bound(const SettlingParams& p) {
    if (!(p.eta1 > 0.0) || !(p.eta2 > 0.0)) throw DomainError("fixed_time_bound: gains must be positive");
    if (p.form == SettlingParams::Form::TwoTerm) {
        if (!(p.k1 > 1.0)) throw DomainError("fixed_time_bound: k1 must exceed 1");
        if (!(p.k2 > 0.0 && p.k2 < 1.0)) throw DomainError("fixed_time_bound: k2 must lie in (0,1)");
        return 1.0 / (p.eta1 * (p.k1 - 1.0)) + 1.0 / (p.eta2 * (1.0 - p.k2));
    }
    if (!(p.k3 > 0.0 && p.k4 > 0.0 && p.k5 > 0.0)) throw DomainError("fixed_time_bound: exponents must be positive");
    if (!(p.k3 * p.k5 > 1.0)) throw DomainError("fixed_time_bound: k3*k5 must exceed 1");
    if (!(p.k4 * p.k5 < 1.0)) throw DomainError("fixed_time_bound: k4*k5 must be below 1");
    return 1.0 / (std::pow(p.eta1, p.k5) * (p.k3 * p.k5 - 1.0)) +
           1.0 / (std::pow(p.eta2, p.k5) * (1.0 - p.k4 * p.k5));
}

// ---------------------------------------------------------------------------
// Rotations.

inline Mat3 rot_x(double t) {
    Mat3 r;
    r << 1, 0, 0, 0, std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t);
    return r;
}
inline Mat3 rot_y(double t) {
    Mat3 r;
    r << std::cos(t), 0, std::sin(t), 0, 1, 0, -std::sin(t), 0, std::cos(t);
    return r;
}
inline Mat3 rot_z(double t) {
    Mat3 r;
    r << std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t), 0, 0, 0, 1;
    return r;
}

/// R_z(tz) R_y(ty) R_x(tx) v for a unit vector v and admissible, not all zero, angles.
inline Vec3 rotate_unit(const Vec3& v, double tx, double ty, double tz) {
    constexpr double half_pi = 1.5707963267948966;
    if (tx * tx + ty * ty + tz * tz == 0.0) throw PreconditionError("rotate_unit: all angles are zero");
    for (double t : {tx, ty, tz})
        if (!(std::abs(t) <= half_pi)) throw PreconditionError("rotate_unit: angle outside [-pi/2, pi/2]");
    if (std::abs(v.norm() - 1.0) > 1e-9) throw PreconditionError("rotate_unit: vector must have unit norm");
    return rot_z(tz) * (rot_y(ty) * (rot_x(tx) * v));
}

}  // namespace nsb
