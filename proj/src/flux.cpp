#include "ftrack/flux.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace ftrack {

const char* to_string(FieldKind kind)
{
    switch (kind) {
    case FieldKind::genuinely_nonlinear:
        return "genuinely-nonlinear";
    case FieldKind::linearly_degenerate:
        return "linearly-degenerate";
    case FieldKind::general:
        return "general";
    }
    return "?";
}

bool Box::contains(const State& u, double tol) const
{
    if (u.size() != lo.size())
        return false;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (!std::isfinite(u[i]) || u[i] < lo[i] - tol || u[i] > hi[i] + tol)
            return false;
    }
    return true;
}

EigenSystem EigenSystem::lambda_normalized() const
{
    EigenSystem out = *this;
    for (int k = 0; k < dim(); ++k) {
        const double g = gnl_rates[k];
        if (g == 0.0)
            continue;
        out.right.col(k) /= g;
        out.left.row(k) *= g;
        out.gnl_rates[k] = 1.0;
    }
    out.normalization = Normalization::lambda;
    return out;
}

EigenSystem FluxModel::eigen_at(const State& u) const
{
    std::vector<State> grads;
    for (int k = 1; k <= dim_; ++k)
        grads.push_back(grad_lambda(k, u));
    return decompose_matrix(jacobian_at(u), kinds_, grads, 0.0);
}

namespace {

State scalar_state(double v)
{
    State s(1);
    s[0] = v;
    return s;
}

Matrix scalar_matrix(double v)
{
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

EigenSystem scalar_eigen(double lambda, double rate)
{
    EigenSystem e;
    e.lambdas = {lambda};
    e.right = scalar_matrix(1.0);
    e.left = scalar_matrix(1.0);
    e.gnl_rates = {rate};
    return e;
}

Box make_box(std::initializer_list<double> lo, std::initializer_list<double> hi)
{
    Box b;
    b.lo = Eigen::Map<const State>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
    b.hi = Eigen::Map<const State>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
    return b;
}

} // namespace

// ---------------------------------------------------------------- Burgers

BurgersModel::BurgersModel()
{
    id_ = "burgers";
    dim_ = 1;
    domain_ = make_box({-3.0}, {3.0});
    kinds_ = {FieldKind::genuinely_nonlinear};
    fences_ = {-3.5, 3.5};
    curve_radius_ = 6.0;
    riemann_radius_ = 6.0;
    declared_gap_ = std::numeric_limits<double>::infinity();
    tv_budget_ = 12.0;
}

State BurgersModel::flux(const State& u) const { return scalar_state(0.5 * u[0] * u[0]); }
Matrix BurgersModel::jacobian_at(const State& u) const { return scalar_matrix(u[0]); }
State BurgersModel::grad_lambda(int, const State&) const { return scalar_state(1.0); }
EigenSystem BurgersModel::eigen_at(const State& u) const { return scalar_eigen(u[0], 1.0); }

// ---------------------------------------------------------------- cubic

CubicModel::CubicModel()
{
    id_ = "cubic";
    dim_ = 1;
    domain_ = make_box({-2.0}, {2.0});
    kinds_ = {FieldKind::general};
    fences_ = {-1.0, 5.0};
    curve_radius_ = 4.0;
    riemann_radius_ = 4.0;
    declared_gap_ = std::numeric_limits<double>::infinity();
    tv_budget_ = 8.0;
}

State CubicModel::flux(const State& u) const { return scalar_state(u[0] * u[0] * u[0] / 3.0); }
Matrix CubicModel::jacobian_at(const State& u) const { return scalar_matrix(u[0] * u[0]); }
State CubicModel::grad_lambda(int, const State& u) const { return scalar_state(2.0 * u[0]); }
EigenSystem CubicModel::eigen_at(const State& u) const
{
    return scalar_eigen(u[0] * u[0], 2.0 * u[0]);
}

// ---------------------------------------------------------------- remark-2x2

Remark2x2Model::Remark2x2Model()
{
    id_ = "remark-2x2";
    dim_ = 2;
    domain_ = make_box({-0.3, -0.2}, {0.3, 0.3});
    kinds_ = {FieldKind::linearly_degenerate, FieldKind::genuinely_nonlinear};
    // lambda_1 = 0, lambda_2 = 1 + u + 2v in [0.3, 1.9] on Omega.
    fences_ = {-0.5, 0.15, 2.5};
    curve_radius_ = 0.5;
    riemann_radius_ = 0.5;
    declared_gap_ = 0.3;
    tv_budget_ = 0.6;
}

State Remark2x2Model::flux(const State& s) const
{
    State f(2);
    f[0] = 0.0;
    f[1] = (1.0 + s[0] + s[1]) * s[1];
    return f;
}

Matrix Remark2x2Model::jacobian_at(const State& s) const
{
    Matrix a(2, 2);
    a << 0.0, 0.0, s[1], 1.0 + s[0] + 2.0 * s[1];
    return a;
}

State Remark2x2Model::grad_lambda(int k, const State&) const
{
    State g(2);
    if (k == 1)
        g << 0.0, 0.0;
    else
        g << 1.0, 2.0;
    return g;
}

EigenSystem Remark2x2Model::eigen_at(const State& s) const
{
    const double v = s[1];
    const double d = 1.0 + s[0] + 2.0 * v;
    const double n1 = std::hypot(d, v);

    EigenSystem e;
    e.lambdas = {0.0, d};
    e.right = Matrix(2, 2);
    e.right << d / n1, 0.0, -v / n1, 1.0;
    e.left = Matrix(2, 2);
    e.left << n1 / d, 0.0, v / d, 1.0;
    e.gnl_rates = {0.0, 2.0};
    return e;
}

// ---------------------------------------------------------------- p-system

PSystemModel::PSystemModel(double kappa, double gamma) : kappa_(kappa), gamma_(gamma)
{
    id_ = "p-system";
    params_ = {{"kappa", kappa}, {"gamma", gamma}};
    dim_ = 2;
    domain_ = make_box({0.5, -1.0}, {2.0, 1.0});
    kinds_ = {FieldKind::genuinely_nonlinear, FieldKind::genuinely_nonlinear};
    const double cmax = sound_speed(domain_.lo[0]);
    const double cmin = sound_speed(domain_.hi[0]);
    fences_ = {-cmax - 0.5, 0.0, cmax + 0.5};
    curve_radius_ = 0.5;
    riemann_radius_ = 0.5;
    declared_gap_ = 2.0 * cmin;
    tv_budget_ = 1.0;
}

double PSystemModel::pressure(double v) const { return kappa_ * std::pow(v, -gamma_); }

double PSystemModel::sound_speed(double v) const
{
    return std::sqrt(gamma_ * kappa_ * std::pow(v, -gamma_ - 1.0));
}

State PSystemModel::flux(const State& s) const
{
    State f(2);
    f[0] = -s[1];
    f[1] = pressure(s[0]);
    return f;
}

Matrix PSystemModel::jacobian_at(const State& s) const
{
    const double dp = -gamma_ * kappa_ * std::pow(s[0], -gamma_ - 1.0);
    Matrix a(2, 2);
    a << 0.0, -1.0, dp, 0.0;
    return a;
}

State PSystemModel::grad_lambda(int k, const State& s) const
{
    // c'(v) = -p''(v) / (2c)
    const double c = sound_speed(s[0]);
    const double d2p = gamma_ * (gamma_ + 1.0) * kappa_ * std::pow(s[0], -gamma_ - 2.0);
    const double dc = -d2p / (2.0 * c);
    State g(2);
    g << (k == 1 ? -dc : dc), 0.0;
    return g;
}

EigenSystem PSystemModel::eigen_at(const State& s) const
{
    const double c = sound_speed(s[0]);
    const double n = std::sqrt(1.0 + c * c);
    const double d2p = gamma_ * (gamma_ + 1.0) * kappa_ * std::pow(s[0], -gamma_ - 2.0);
    const double dc = -d2p / (2.0 * c);

    EigenSystem e;
    e.lambdas = {-c, c};
    e.right = Matrix(2, 2);
    e.right << 1.0 / n, -1.0 / n, c / n, c / n;
    e.left = Matrix(2, 2);
    e.left << n / 2.0, n / (2.0 * c), -n / 2.0, n / (2.0 * c);
    e.gnl_rates = {-dc / n, -dc / n};
    return e;
}

// ---------------------------------------------------------------- linear

LinearModel::LinearModel(Matrix m)
    : LinearModel(m, std::vector<FieldKind>(static_cast<std::size_t>(m.rows()),
                                            FieldKind::linearly_degenerate))
{
}

LinearModel::LinearModel(Matrix m, std::vector<FieldKind> declared) : m_(std::move(m))
{
    if (m_.rows() != m_.cols() || m_.rows() < 1)
        throw ConfigError("model.params", "linear model needs a square matrix");
    id_ = "linear";
    dim_ = static_cast<int>(m_.rows());
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            params_["m" + std::to_string(i + 1) + std::to_string(j + 1)] = m_(i, j);
    domain_.lo = State::Constant(dim_, -10.0);
    domain_.hi = State::Constant(dim_, 10.0);
    kinds_ = std::move(declared);
    // Orientation: first nonzero component positive on every family.
    eig_ = decompose_matrix(m_, std::vector<FieldKind>(dim_, FieldKind::linearly_degenerate), {},
                            1e-8);
    fences_.resize(static_cast<std::size_t>(dim_) + 1);
    fences_.front() = eig_.lambdas.front() - 1.0;
    fences_.back() = eig_.lambdas.back() + 1.0;
    declared_gap_ = std::numeric_limits<double>::infinity();
    for (int k = 1; k < dim_; ++k) {
        fences_[k] = 0.5 * (eig_.lambdas[k - 1] + eig_.lambdas[k]);
        declared_gap_ = std::min(declared_gap_, eig_.lambdas[k] - eig_.lambdas[k - 1]);
    }
    curve_radius_ = 20.0;
    riemann_radius_ = 20.0;
    tv_budget_ = 100.0;
}

State LinearModel::flux(const State& u) const { return m_ * u; }
Matrix LinearModel::jacobian_at(const State&) const { return m_; }
State LinearModel::grad_lambda(int, const State&) const { return State::Zero(dim_); }
EigenSystem LinearModel::eigen_at(const State&) const { return eig_; }

// ---------------------------------------------------------------- catalog

std::vector<std::string> catalog_ids() { return {"burgers", "cubic", "remark-2x2", "p-system", "linear"}; }

ModelPtr make_model(const std::string& id, const std::map<std::string, double>& params)
{
    auto reject_params = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, value] : params) {
            bool ok = false;
            for (const char* a : allowed)
                ok = ok || key == a;
            if (!ok)
                throw ConfigError("model.params." + key, "unknown parameter for " + id);
        }
    };
    if (id == "burgers") {
        reject_params({});
        return std::make_shared<BurgersModel>();
    }
    if (id == "cubic") {
        reject_params({});
        return std::make_shared<CubicModel>();
    }
    if (id == "remark-2x2") {
        reject_params({});
        return std::make_shared<Remark2x2Model>();
    }
    if (id == "p-system") {
        reject_params({"kappa", "gamma"});
        const double kappa = params.count("kappa") ? params.at("kappa") : 1.0;
        const double gamma = params.count("gamma") ? params.at("gamma") : 1.4;
        if (!(kappa > 0.0))
            throw ConfigError("model.params.kappa", "must be positive");
        if (!(gamma > 1.0))
            throw ConfigError("model.params.gamma", "must exceed 1");
        return std::make_shared<PSystemModel>(kappa, gamma);
    }
    if (id == "linear") {
        if (params.empty()) {
            Matrix m(2, 2);
            m << 0.5, 1.0, 0.0, -0.5;
            return std::make_shared<LinearModel>(m);
        }
        const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(params.size()))));
        if (n * n != static_cast<int>(params.size()) || n > 9)
            throw ConfigError("model.params", "linear model expects entries m11..mNN");
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const std::string key = "m" + std::to_string(i + 1) + std::to_string(j + 1);
                auto it = params.find(key);
                if (it == params.end())
                    throw ConfigError("model.params." + key, "missing matrix entry");
                m(i, j) = it->second;
            }
        }
        try {
            return std::make_shared<LinearModel>(m);
        } catch (const DegeneracyError& e) {
            throw ConfigError("model.params", e.what());
        }
    }
    throw ConfigError("model.id", "unknown model '" + id + "'");
}

// ---------------------------------------------------------------- eigen ops

Matrix jacobian(const FluxModel& model, const State& u)
{
    if (!model.domain().contains(u))
        throw DomainError("jacobian: state outside the model domain");
    return model.jacobian_at(u);
}

namespace {

void check_gap(const EigenSystem& e, double gap_tol)
{
    for (int k = 1; k < e.dim(); ++k) {
        if (e.lambdas[k] - e.lambdas[k - 1] < gap_tol) {
            std::ostringstream os;
            os << "eigenvalue gap " << e.lambdas[k] - e.lambdas[k - 1] << " below " << gap_tol;
            throw DegeneracyError(os.str());
        }
    }
}

} // namespace

EigenSystem decompose_matrix(const Matrix& a, const std::vector<FieldKind>& kinds,
                             const std::vector<State>& grads, double gap_tol)
{
    const auto n = static_cast<int>(a.rows());
    EigenSystem e;
    e.gnl_rates.assign(static_cast<std::size_t>(n), 0.0);
    if (n == 1) {
        e.lambdas = {a(0, 0)};
        e.right = scalar_matrix(1.0);
        e.left = scalar_matrix(1.0);
    } else {
        Eigen::EigenSolver<Matrix> solver(a, true);
        if (solver.info() != Eigen::Success)
            throw DegeneracyError("eigen-decomposition failed");
        const auto& values = solver.eigenvalues();
        const auto& vectors = solver.eigenvectors();
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        for (int i = 0; i < n; ++i) {
            if (std::abs(values[i].imag()) > 1e-12 * scale)
                throw DegeneracyError("complex eigenvalues: system not hyperbolic");
        }
        std::sort(order.begin(), order.end(),
                  [&](int x, int y) { return values[x].real() < values[y].real(); });
        e.lambdas.resize(static_cast<std::size_t>(n));
        e.right = Matrix(n, n);
        for (int k = 0; k < n; ++k) {
            e.lambdas[k] = values[order[k]].real();
            State r = vectors.col(order[k]).real();
            e.right.col(k) = r / r.norm();
        }
    }

    for (int k = 0; k < n; ++k) {
        const bool gnl = k < static_cast<int>(kinds.size()) &&
                         kinds[k] == FieldKind::genuinely_nonlinear && k < static_cast<int>(grads.size());
        double sign = 1.0;
        if (gnl) {
            if (grads[k].dot(e.right.col(k)) < 0.0)
                sign = -1.0;
        } else {
            for (int i = 0; i < n; ++i) {
                if (std::abs(e.right(i, k)) > 1e-14) {
                    sign = e.right(i, k) > 0.0 ? 1.0 : -1.0;
                    break;
                }
            }
        }
        e.right.col(k) *= sign;
    }
    if (n > 1)
        e.left = e.right.inverse();
    for (int k = 0; k < n && k < static_cast<int>(grads.size()); ++k)
        e.gnl_rates[k] = grads[k].dot(e.right.col(k));
    check_gap(e, gap_tol);
    return e;
}

EigenSystem eig_decompose(const FluxModel& model, const State& u, double gap_tol)
{
    if (!model.domain().contains(u))
        throw DomainError("eig_decompose: state outside the model domain");
    EigenSystem e = model.eigen_at(u);
    check_gap(e, gap_tol);
    return e;
}

Matrix averaged_matrix(const FluxModel& model, const State& uL, const State& uR)
{
    using Rule = boost::math::quadrature::gauss<double, 8>;
    const auto& nodes = Rule::abscissa();
    const auto& weights = Rule::weights();
    const auto n = model.dim();
    Matrix acc = Matrix::Zero(n, n);
    const State mid = 0.5 * (uL + uR);
    const State half = 0.5 * (uL - uR);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        // Symmetric node pairs on theta in [0, 1]; the integrand in theta maps to
        // uR + theta (uL - uR), i.e. mid +/- x * half.
        acc += weights[i] * model.jacobian_at(mid + nodes[i] * half);
        acc += weights[i] * model.jacobian_at(mid - nodes[i] * half);
    }
    return 0.5 * acc;
}

AveragedEigenSystem average_eigs(const FluxModel& model, const State& uL, const State& uR,
                                 double gap_tol)
{
    const Box& box = model.domain();
    if (!box.contains(uL) || !box.contains(uR))
        throw DomainError("average_eigs: segment leaves the model domain");
    AveragedEigenSystem out;
    if (uL == uR) {
        static_cast<EigenSystem&>(out) = eig_decompose(model, uL, gap_tol);
        out.averaged = model.jacobian_at(uL);
        return out;
    }
    out.averaged = averaged_matrix(model, uL, uR);
    const State mid = 0.5 * (uL + uR);
    std::vector<State> grads;
    for (int k = 1; k <= model.dim(); ++k)
        grads.push_back(model.grad_lambda(k, mid));
    static_cast<EigenSystem&>(out) =
        decompose_matrix(out.averaged, model.field_kinds(), grads, gap_tol);
    return out;
}

// ---------------------------------------------------------------- audit

bool GnlAuditReport::ok() const
{
    return std::all_of(families.begin(), families.end(),
                       [](const FamilyAudit& f) { return f.consistent; });
}

GnlAuditReport gnl_audit(const FluxModel& model, int grid_resolution)
{
    if (grid_resolution < 2)
        throw std::invalid_argument("gnl_audit: grid_resolution must be at least 2");
    const int n = model.dim();
    GnlAuditReport report;
    report.model = model.id();
    report.grid_resolution = grid_resolution;
    for (int k = 1; k <= n; ++k) {
        FamilyAudit f;
        f.family = k;
        f.declared = model.field_kind(k);
        f.min_rate = std::numeric_limits<double>::infinity();
        f.max_rate = -std::numeric_limits<double>::infinity();
        report.families.push_back(f);
    }

    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    const Box& box = model.domain();
    while (true) {
        State u(n);
        for (int d = 0; d < n; ++d)
            u[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * idx[d] / (grid_resolution - 1);
        const EigenSystem e = model.eigen_at(u);
        for (int k = 0; k < n; ++k) {
            report.families[k].min_rate = std::min(report.families[k].min_rate, e.gnl_rates[k]);
            report.families[k].max_rate = std::max(report.families[k].max_rate, e.gnl_rates[k]);
        }
        int d = 0;
        while (d < n && ++idx[d] == grid_resolution)
            idx[d++] = 0;
        if (d == n)
            break;
    }

    std::ostringstream problems;
    for (auto& f : report.families) {
        switch (f.declared) {
        case FieldKind::genuinely_nonlinear:
            f.consistent = f.min_rate * f.max_rate > 0.0;
            break;
        case FieldKind::linearly_degenerate:
            f.consistent = std::max(std::abs(f.min_rate), std::abs(f.max_rate)) <= 1e-10;
            break;
        case FieldKind::general:
            f.consistent = true;
            break;
        }
        if (!f.consistent)
            problems << " family " << f.family << " declared " << to_string(f.declared)
                     << " but rate in [" << f.min_rate << ", " << f.max_rate << "];";
    }
    if (!report.ok())
        throw ModelAuditError("gnl_audit(" + model.id() + "):" + problems.str());
    return report;
}

} // namespace ftrack
