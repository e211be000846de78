#pragma once

#include "ftrack/core.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace ftrack {

enum class FieldKind { genuinely_nonlinear, linearly_degenerate, general };

const char* to_string(FieldKind kind);

/// Which scaling the stored right eigenvectors carry.
enum class Normalization {
    unit,   ///< |r_i| = 1, l_j . r_i = delta_ij
    lambda, ///< grad(lambda_i) . r_i = 1 on genuinely nonlinear fields
};

/// Componentwise box Omega = [lo, hi].
struct Box {
    State lo;
    State hi;

    bool contains(const State& u, double tol = 1e-12) const;
};

/// Eigenstructure of A(u) (or of an averaged matrix).
/// Families are 1-based in every accessor taking `k`.
struct EigenSystem {
    std::vector<double> lambdas; ///< ascending
    Matrix right;                ///< column k-1 is r_k
    Matrix left;                 ///< row k-1 is l_k
    std::vector<double> gnl_rates;
    Normalization normalization = Normalization::unit;

    int dim() const { return static_cast<int>(lambdas.size()); }
    double lambda(int k) const { return lambdas[k - 1]; }
    State r(int k) const { return right.col(k - 1); }
    State l(int k) const { return left.row(k - 1).transpose(); }
    double gnl_rate(int k) const { return gnl_rates[k - 1]; }

    /// Copy rescaled so that grad(lambda_k) . r_k = 1 on every family with a
    /// nonzero rate; left vectors are rescaled to stay dual.
    EigenSystem lambda_normalized() const;
};

/// Eigenstructure of the averaged matrix A(uL, uR).
struct AveragedEigenSystem : EigenSystem {
    Matrix averaged;
};

/// A flux f : Omega -> R^N with analytic Jacobian and eigenstructure.
class FluxModel {
public:
    virtual ~FluxModel() = default;

    const std::string& id() const { return id_; }
    const std::map<std::string, double>& params() const { return params_; }
    int dim() const { return dim_; }
    const Box& domain() const { return domain_; }
    FieldKind field_kind(int k) const { return kinds_[k - 1]; }
    const std::vector<FieldKind>& field_kinds() const { return kinds_; }

    /// Speed fences lambda_check_0 < ... < lambda_check_N.
    const std::vector<double>& fences() const { return fences_; }

    /// Speed of nonphysical fronts, strictly above every characteristic speed.
    double nonphysical_speed() const { return fences_.back() + 1.0; }

    /// Largest |s| accepted by elementary-curve evaluation.
    double curve_radius() const { return curve_radius_; }

    /// Largest |uR - uL| accepted by the accurate Riemann solver.
    double riemann_radius() const { return riemann_radius_; }

    /// Lower bound on eigenvalue gaps over Omega (infinite for N = 1).
    double declared_gap() const { return declared_gap_; }

    /// Largest total variation of initial data accepted by the tracker.
    double tv_budget() const { return tv_budget_; }

    bool scalar() const { return dim_ == 1; }

    virtual State flux(const State& u) const = 0;
    virtual Matrix jacobian_at(const State& u) const = 0;
    virtual State grad_lambda(int k, const State& u) const = 0;

    /// Analytic eigenstructure with unit right vectors and the orientation
    /// convention applied. The default decomposes `jacobian_at` numerically.
    virtual EigenSystem eigen_at(const State& u) const;

protected:
    std::string id_;
    std::map<std::string, double> params_;
    int dim_ = 1;
    Box domain_;
    std::vector<FieldKind> kinds_;
    std::vector<double> fences_;
    double curve_radius_ = 1.0;
    double riemann_radius_ = 1.0;
    double declared_gap_ = 0.0;
    double tv_budget_ = 1.0;
};

using ModelPtr = std::shared_ptr<const FluxModel>;

/// f(u) = u^2 / 2.
class BurgersModel final : public FluxModel {
public:
    BurgersModel();
    State flux(const State& u) const override;
    Matrix jacobian_at(const State& u) const override;
    State grad_lambda(int k, const State& u) const override;
    EigenSystem eigen_at(const State& u) const override;
};

/// f(u) = u^3 / 3; neither convex nor concave on Omega.
class CubicModel final : public FluxModel {
public:
    CubicModel();
    State flux(const State& u) const override;
    Matrix jacobian_at(const State& u) const override;
    State grad_lambda(int k, const State& u) const override;
    EigenSystem eigen_at(const State& u) const override;
};

/// u_t = 0, v_t + ((1 + u + v) v)_x = 0: family 1 linearly degenerate with
/// lambda_1 = 0, family 2 genuinely nonlinear with lambda_2 = 1 + u + 2v.
class Remark2x2Model final : public FluxModel {
public:
    Remark2x2Model();
    State flux(const State& u) const override;
    Matrix jacobian_at(const State& u) const override;
    State grad_lambda(int k, const State& u) const override;
    EigenSystem eigen_at(const State& u) const override;
};

/// p-system in Lagrangian coordinates, state (v, u):
/// v_t - u_x = 0, u_t + p(v)_x = 0 with p(v) = kappa v^-gamma.
class PSystemModel final : public FluxModel {
public:
    explicit PSystemModel(double kappa = 1.0, double gamma = 1.4);
    State flux(const State& u) const override;
    Matrix jacobian_at(const State& u) const override;
    State grad_lambda(int k, const State& u) const override;
    EigenSystem eigen_at(const State& u) const override;

    double pressure(double v) const;
    double sound_speed(double v) const;

private:
    double kappa_;
    double gamma_;
};

/// f(u) = M u with real distinct eigenvalues. Eigenstructure is computed
/// numerically once.
class LinearModel final : public FluxModel {
public:
    explicit LinearModel(Matrix m);
    /// Overrides the declared field kinds (used to exercise the audit).
    LinearModel(Matrix m, std::vector<FieldKind> declared);

    State flux(const State& u) const override;
    Matrix jacobian_at(const State& u) const override;
    State grad_lambda(int k, const State& u) const override;
    EigenSystem eigen_at(const State& u) const override;

    const Matrix& matrix() const { return m_; }

private:
    Matrix m_;
    EigenSystem eig_;
};

/// Catalog lookup. Throws ConfigError("model.id") for unknown ids.
ModelPtr make_model(const std::string& id, const std::map<std::string, double>& params = {});

/// Known catalog ids.
std::vector<std::string> catalog_ids();

/// Df(u). Throws DomainError outside Omega.
Matrix jacobian(const FluxModel& model, const State& u);

/// Eigenstructure at u; throws DomainError / DegeneracyError.
EigenSystem eig_decompose(const FluxModel& model, const State& u, double gap_tol = 1e-8);

/// Eigen-decomposition of an arbitrary matrix with real distinct eigenvalues.
/// `grads` (one gradient per family, may be empty) fixes orientation on
/// families flagged genuinely nonlinear; other families get their first
/// nonzero component positive.
EigenSystem decompose_matrix(const Matrix& a, const std::vector<FieldKind>& kinds,
                             const std::vector<State>& grads, double gap_tol = 1e-8);

/// Eigenstructure of the averaged matrix int_0^1 A(theta uL + (1-theta) uR) dtheta
/// (Gauss-Legendre, 8 nodes).
AveragedEigenSystem average_eigs(const FluxModel& model, const State& uL, const State& uR,
                                 double gap_tol = 1e-8);

/// The averaged matrix alone.
Matrix averaged_matrix(const FluxModel& model, const State& uL, const State& uR);

struct FamilyAudit {
    int family = 0;
    FieldKind declared = FieldKind::general;
    double min_rate = 0.0;
    double max_rate = 0.0;
    bool consistent = true;
};

struct GnlAuditReport {
    std::string model;
    int grid_resolution = 0;
    std::vector<FamilyAudit> families;

    bool ok() const;
};

/// Measures grad(lambda_i) . r_i on a uniform grid over Omega and checks it
/// against the declared field kinds. Throws ModelAuditError on mismatch.
GnlAuditReport gnl_audit(const FluxModel& model, int grid_resolution);

} // namespace ftrack
