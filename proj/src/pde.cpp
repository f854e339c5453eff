#include "ifef/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ifef/rng.hpp"

namespace ifef {

namespace {

constexpr double kPi = std::numbers::pi;

/// Value field and exact per-axis jets of a closed-form u(p0, p1), the jets
/// coming from forward-mode hyper-dual evaluation seeded one axis at a time.
template <class F>
std::pair<ScalarField, JetField> closed_form(F f) {
    ScalarField value = [f](const VectorXd& p) { return f(p(0), p(1)); };
    JetField jet = [f](const VectorXd& p) {
        Jet2 out(2, 2);
        const HyperDual along0 = f(HyperDual::variable(p(0)), HyperDual(p(1)));
        const HyperDual along1 = f(HyperDual(p(0)), HyperDual::variable(p(1)));
        out.value = along0.v;
        out.grad << along0.d, along1.d;
        out.diag2 << along0.dd, along1.dd;
        return out;
    };
    return {value, jet};
}

Box make_box(double lo0, double hi0, double lo1, double hi1) {
    Box box;
    box.lo = VectorXd(2);
    box.hi = VectorXd(2);
    box.lo << lo0, lo1;
    box.hi << hi0, hi1;
    return box;
}

BoundaryCondition face_condition(BoundaryCondition::Kind kind, int axis, bool upper,
                                 ScalarField target, std::string name) {
    BoundaryCondition bc;
    bc.kind = kind;
    bc.axis = axis;
    bc.upper = upper;
    bc.target = std::move(target);
    bc.name = std::move(name);
    return bc;
}

BoundaryCondition periodic_condition(int axis, int order, std::string name) {
    BoundaryCondition bc;
    bc.kind = BoundaryCondition::Kind::PeriodicPair;
    bc.axis = axis;
    bc.derivative_order = order;
    bc.name = std::move(name);
    return bc;
}

ScalarField zero_field() {
    return [](const VectorXd&) { return 0.0; };
}

double face_measure(const Box& box, int fixed_axis) {
    double m = 1.0;
    for (int i = 0; i < box.dims(); ++i)
        if (i != fixed_axis) m *= box.extent(i);
    return m;
}

VectorXd linspace(double lo, double hi, Index count) {
    if (count == 1) return VectorXd::Constant(1, 0.5 * (lo + hi));
    return VectorXd::LinSpaced(count, lo, hi);
}

/// `count` points on the face {axis = value}: evenly spaced (uniform) or LHS
/// over the remaining axes.
MatrixXd face_points(const Box& box, int axis, double value, Index count, bool lhs, Rng& rng) {
    const int dims = box.dims();
    MatrixXd pts(dims, count);
    if (!lhs) {
        if (dims != 2) throw ConfigError("uniform face sampling supports 2-D domains only");
        const int free_axis = 1 - axis;
        pts.row(free_axis) = linspace(box.lo(free_axis), box.hi(free_axis), count).transpose();
    } else {
        for (int i = 0; i < dims; ++i) {
            if (i == axis) continue;
            std::vector<Index> perm(count);
            std::iota(perm.begin(), perm.end(), Index{0});
            rng.shuffle(std::span<Index>(perm));
            for (Index k = 0; k < count; ++k)
                pts(i, k) = box.lo(i) + box.extent(i) * (perm[k] + rng.uniform01()) / count;
        }
    }
    pts.row(axis).setConstant(value);
    return pts;
}

CollocationSet sample_boundary(const PdeProblem& problem, Index boundary_points, bool lhs,
                               FaceMeasure measure, Rng& rng) {
    CollocationSet set;
    const Box& box = problem.domain;
    for (const BoundaryGroup& group : split_boundary_budget(problem, boundary_points, measure)) {
        if (group.periodic) {
            const MatrixXd lo_pts = face_points(box, group.axis, box.lo(group.axis), group.samples,
                                                lhs, rng);
            for (Index k = 0; k < lo_pts.cols(); ++k) {
                VectorXd b = lo_pts.col(k);
                b(group.axis) = box.hi(group.axis);
                for (int cond : group.conditions)
                    set.boundary.push_back({cond, lo_pts.col(k), b});
            }
        } else {
            const double value = group.upper ? box.hi(group.axis) : box.lo(group.axis);
            const MatrixXd pts = face_points(box, group.axis, value, group.samples, lhs, rng);
            for (Index k = 0; k < pts.cols(); ++k)
                set.boundary.push_back({group.conditions.front(), pts.col(k), VectorXd()});
        }
    }
    return set;
}

}  // namespace

bool Box::contains(const VectorXd& x, double tol) const {
    if (x.size() != lo.size()) return false;
    for (Index i = 0; i < x.size(); ++i)
        if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
    return true;
}

int PdeProblem::interior_order() const {
    if (const auto* lin = std::get_if<LinearOperatorSpec>(&op)) {
        int order = 0;
        for (const auto& term : lin->terms) order = std::max(order, term.comp.order());
        return order;
    }
    return 2;
}

int PdeProblem::boundary_order() const {
    int order = 0;
    for (const auto& bc : conditions)
        if (bc.kind == BoundaryCondition::Kind::PeriodicPair)
            order = std::max(order, bc.derivative_order);
    return order;
}

double apply_operator(const InteriorOperator& op, const Jet2& u) {
    if (const auto* lin = std::get_if<LinearOperatorSpec>(&op)) {
        double acc = 0.0;
        for (const auto& term : lin->terms) acc += term.coeff * u[term.comp];
        return acc;
    }
    const auto& burgers = std::get<NonlinearBurgers>(op);
    return u.grad(burgers.t_axis) + burgers.nonlinearity * u.value * u.grad(burgers.x_axis) -
           burgers.nu * u.diag2(burgers.x_axis);
}

double interior_residual(const PdeProblem& problem, const Jet2& u, const VectorXd& x) {
    return apply_operator(problem.op, u) - problem.source(x);
}

PdeProblem make_helmholtz(double a1, double a2, const Box& domain) {
    if (domain.dims() != 2) throw ConfigError("Helmholtz needs a 2-D domain");
    PdeProblem p;
    p.name = "helmholtz";
    p.domain = domain;
    p.axis_names = {"x", "y"};
    p.parameters = {{"a1", a1}, {"a2", a2}};
    p.op = LinearOperatorSpec{{{Component::diag2(0), 1.0},
                               {Component::diag2(1), 1.0},
                               {Component::value(), 1.0}}};
    auto u = [a1, a2](auto x, auto y) {
        using std::sin;
        return sin(a1 * kPi * x) * sin(a2 * kPi * y);
    };
    std::tie(p.exact, p.exact_jet) = closed_form(u);
    // Laplacian of sin(a1 pi x) sin(a2 pi y) is -pi^2 (a1^2 + a2^2) times itself.
    const double factor = 1.0 - kPi * kPi * (a1 * a1 + a2 * a2);
    p.source = [u, factor](const VectorXd& q) { return factor * u(q(0), q(1)); };
    for (int axis = 0; axis < 2; ++axis)
        for (bool upper : {false, true})
            p.conditions.push_back(face_condition(
                BoundaryCondition::Kind::Dirichlet, axis, upper, zero_field(),
                std::string("dirichlet ") + p.axis_names[axis] + (upper ? "=hi" : "=lo")));
    return p;
}

PdeProblem make_convection(double beta) {
    PdeProblem p;
    p.name = "convection";
    p.domain = make_box(0.0, 2.0 * kPi, 0.0, 1.0);
    p.axis_names = {"x", "t"};
    p.parameters = {{"beta", beta}};
    p.op = LinearOperatorSpec{{{Component::grad(1), 1.0}, {Component::grad(0), beta}}};
    auto u = [beta](auto x, auto t) {
        using std::sin;
        return sin(x - beta * t);
    };
    std::tie(p.exact, p.exact_jet) = closed_form(u);
    p.source = zero_field();
    p.conditions.push_back(face_condition(BoundaryCondition::Kind::Initial, 1, false,
                                          [](const VectorXd& q) { return std::sin(q(0)); },
                                          "initial"));
    p.conditions.push_back(periodic_condition(0, 0, "periodic u"));
    return p;
}

PdeProblem make_multisine_convection(double beta, const std::vector<double>& frequencies,
                                     const std::vector<double>& amplitudes) {
    if (frequencies.size() != amplitudes.size() || frequencies.empty())
        throw ConfigError("frequencies and amplitudes must be non-empty and equal length");
    PdeProblem p;
    p.name = "multisine_convection";
    p.domain = make_box(0.0, 1.0, 0.0, 1.0);
    p.axis_names = {"x", "t"};
    p.parameters = {{"beta", beta}};
    p.op = LinearOperatorSpec{{{Component::grad(1), 1.0}, {Component::grad(0), beta}}};
    auto u = [beta, frequencies, amplitudes](auto x, auto t) {
        using std::sin;
        decltype(x - t) acc(0.0);
        for (std::size_t i = 0; i < frequencies.size(); ++i)
            acc = acc + amplitudes[i] * sin(2.0 * kPi * frequencies[i] * (x - beta * t));
        return acc;
    };
    std::tie(p.exact, p.exact_jet) = closed_form(u);
    p.source = zero_field();
    p.conditions.push_back(face_condition(BoundaryCondition::Kind::Initial, 1, false,
                                          [u](const VectorXd& q) { return u(q(0), 0.0); },
                                          "initial"));
    p.conditions.push_back(periodic_condition(0, 0, "periodic u"));
    return p;
}

PdeProblem make_convection_diffusion(double c, double d, double a_low, double a_high, double k_low,
                                     double k_high) {
    if (!(d > 0.0)) throw ConfigError("diffusivity must be positive");
    PdeProblem p;
    p.name = "convection_diffusion";
    p.domain = make_box(0.0, 1.0, 0.0, 1.0);
    p.axis_names = {"x", "t"};
    p.parameters = {{"c", c},           {"d", d},           {"a_low", a_low},
                    {"a_high", a_high}, {"k_low", k_low}, {"k_high", k_high}};
    p.op = LinearOperatorSpec{
        {{Component::grad(1), 1.0}, {Component::grad(0), c}, {Component::diag2(0), -d}}};
    auto u = [=](auto x, auto t) {
        using std::exp;
        using std::sin;
        return a_low * exp(-d * k_low * k_low * t) * sin(k_low * (x - c * t)) +
               a_high * exp(-d * k_high * k_high * t) * sin(k_high * (x - c * t));
    };
    std::tie(p.exact, p.exact_jet) = closed_form(u);
    p.source = zero_field();
    p.conditions.push_back(face_condition(
        BoundaryCondition::Kind::Initial, 1, false,
        [=](const VectorXd& q) {
            return a_low * std::sin(k_low * q(0)) + a_high * std::sin(k_high * q(0));
        },
        "initial"));
    p.conditions.push_back(periodic_condition(0, 0, "periodic u"));
    p.conditions.push_back(periodic_condition(0, 1, "periodic u_x"));
    return p;
}

PdeProblem make_burgers(double nu, double nonlinearity) {
    if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
    PdeProblem p;
    p.name = "burgers";
    p.domain = make_box(-1.0, 1.0, 0.0, 1.0);
    p.axis_names = {"x", "t"};
    p.parameters = {{"nu", nu}, {"nonlinearity", nonlinearity}};
    p.op = NonlinearBurgers{nu, nonlinearity, 0, 1};
    p.source = zero_field();
    p.conditions.push_back(face_condition(BoundaryCondition::Kind::Initial, 1, false,
                                          [](const VectorXd& q) { return -std::sin(kPi * q(0)); },
                                          "initial"));
    p.conditions.push_back(
        face_condition(BoundaryCondition::Kind::Dirichlet, 0, false, zero_field(), "dirichlet x=-1"));
    p.conditions.push_back(
        face_condition(BoundaryCondition::Kind::Dirichlet, 0, true, zero_field(), "dirichlet x=1"));
    return p;
}

MatrixXd tensor_grid(const Box& box, const std::vector<int>& counts) {
    if (static_cast<int>(counts.size()) != box.dims()) throw ConfigError("grid rank != domain rank");
    Index total = 1;
    for (int c : counts) {
        if (c < 1) throw ConfigError("grid counts must be positive");
        total *= c;
    }
    MatrixXd pts(box.dims(), total);
    for (Index k = 0; k < total; ++k) {
        Index rest = k;
        for (int i = 0; i < box.dims(); ++i) {
            const Index idx = rest % counts[i];
            rest /= counts[i];
            pts(i, k) = counts[i] == 1
                            ? 0.5 * (box.lo(i) + box.hi(i))
                            : box.lo(i) + box.extent(i) * static_cast<double>(idx) / (counts[i] - 1);
        }
    }
    return pts;
}

FaceMeasure parse_face_measure(const std::string& name) {
    if (name == "normalized") return FaceMeasure::Normalized;
    if (name == "physical") return FaceMeasure::Physical;
    throw ConfigError("unknown face measure '" + name + "' (expected normalized or physical)");
}

std::string to_string(FaceMeasure m) { return m == FaceMeasure::Normalized ? "normalized" : "physical"; }

std::vector<BoundaryGroup> split_boundary_budget(const PdeProblem& problem, Index total,
                                                 FaceMeasure measure_kind) {
    if (total < 1) throw ConfigError("boundary budget must be positive");
    std::vector<BoundaryGroup> groups;
    for (int i = 0; i < static_cast<int>(problem.conditions.size()); ++i) {
        const auto& bc = problem.conditions[i];
        const double m = measure_kind == FaceMeasure::Physical ? face_measure(problem.domain, bc.axis) : 1.0;
        if (bc.kind == BoundaryCondition::Kind::PeriodicPair) {
            auto it = std::find_if(groups.begin(), groups.end(), [&](const BoundaryGroup& g) {
                return g.periodic && g.axis == bc.axis;
            });
            if (it != groups.end()) {
                it->conditions.push_back(i);
                continue;
            }
            groups.push_back({{i}, true, bc.axis, false, 2.0 * m, 0});
        } else {
            groups.push_back({{i}, false, bc.axis, bc.upper, m, 0});
        }
    }
    double measure = 0.0;
    for (const auto& g : groups) measure += g.measure;
    for (auto& g : groups) {
        const auto share = static_cast<Index>(std::llround(static_cast<double>(total) * g.measure / measure));
        g.samples = std::max<Index>(1, g.periodic ? share / 2 : share);
    }
    return groups;
}

CollocationSet sample_uniform(const PdeProblem& problem, const std::vector<int>& interior_counts,
                              Index boundary_points, std::uint64_t seed, FaceMeasure measure) {
    Rng rng(seed);
    CollocationSet set = sample_boundary(problem, boundary_points, false, measure, rng);
    set.interior = tensor_grid(problem.domain, interior_counts);
    set.seed = seed;
    set.sampler = "uniform";
    return set;
}

MatrixXd latin_hypercube(const Box& box, Index count, std::uint64_t seed) {
    if (count < 1) throw ConfigError("LHS count must be positive");
    Rng rng(seed);
    MatrixXd pts(box.dims(), count);
    std::vector<Index> perm(count);
    for (int i = 0; i < box.dims(); ++i) {
        std::iota(perm.begin(), perm.end(), Index{0});
        rng.shuffle(std::span<Index>(perm));
        for (Index k = 0; k < count; ++k)
            pts(i, k) = box.lo(i) + box.extent(i) * (perm[k] + rng.uniform01()) / count;
    }
    return pts;
}

CollocationSet sample_lhs(const PdeProblem& problem, Index boundary_points, Index interior_points,
                          std::uint64_t seed, FaceMeasure measure) {
    Rng rng(seed);
    CollocationSet set = sample_boundary(problem, boundary_points, true, measure, rng);
    set.interior = latin_hypercube(problem.domain, interior_points, rng.next_u64());
    set.seed = seed;
    set.sampler = "lhs";
    return set;
}

double NonlinearResidualRow::operator()(const VectorXd& theta) const {
    const double u = value.dot(theta);
    return dt.dot(theta) + op.nonlinearity * u * dx.dot(theta) - op.nu * dxx.dot(theta) - source;
}

std::variant<VectorXd, NonlinearResidualRow> residual_row(const PdeProblem& problem,
                                                          const FeatureBasis& basis,
                                                          const VectorXd& x) {
    basis.validate();
    const JetBatch psi = forward_features(basis, x, problem.interior_order());
    require_finite(psi, "residual row");
    if (const auto* lin = std::get_if<LinearOperatorSpec>(&problem.op))
        return VectorXd(interior_design(*lin, psi).row(0).transpose());
    const auto& burgers = std::get<NonlinearBurgers>(problem.op);
    NonlinearResidualRow row;
    row.value = psi.value().col(0);
    row.dt = psi.grad(burgers.t_axis).col(0);
    row.dx = psi.grad(burgers.x_axis).col(0);
    row.dxx = psi.diag2(burgers.x_axis).col(0);
    row.op = burgers;
    row.source = problem.source(x);
    return row;
}

BoundaryLayout layout_boundary(const PdeProblem& problem, const CollocationSet& collocation) {
    BoundaryLayout layout;
    const Index rows = collocation.boundary_rows();
    Index n_points = 0;
    for (const auto& s : collocation.boundary) n_points += s.b.size() > 0 ? 2 : 1;
    layout.points.resize(problem.dims(), n_points);
    layout.targets.resize(rows);
    layout.rows.reserve(rows);
    layout.order = problem.boundary_order();

    Index at = 0;
    for (Index i = 0; i < rows; ++i) {
        const BoundarySample& s = collocation.boundary[i];
        if (s.condition < 0 || s.condition >= static_cast<int>(problem.conditions.size()))
            throw ConfigError("boundary point " + std::to_string(i) + " carries no condition tag");
        const BoundaryCondition& bc = problem.conditions[s.condition];
        if (!problem.domain.contains(s.a, 1e-9))
            throw ConfigError("boundary point " + std::to_string(i) + " outside the domain");
        layout.points.col(at) = s.a;
        const Index ia = at++;
        if (bc.kind == BoundaryCondition::Kind::PeriodicPair) {
            if (s.b.size() != s.a.size())
                throw ConfigError("periodic boundary point " + std::to_string(i) + " lacks its pair");
            layout.points.col(at) = s.b;
            const Index ib = at++;
            const Component comp = bc.derivative_order == 0 ? Component::value()
                                                            : Component::grad(bc.axis);
            layout.rows.push_back({{ia, comp, 1.0}, {ib, comp, -1.0}});
            layout.targets(i) = 0.0;
        } else {
            layout.rows.push_back({{ia, Component::value(), 1.0}});
            layout.targets(i) = bc.target(s.a);
        }
    }
    return layout;
}

MatrixXd boundary_design(const BoundaryLayout& layout, const JetBatch& psi) {
    MatrixXd design(layout.row_count(), psi.rows());
    for (Index i = 0; i < layout.row_count(); ++i) {
        design.row(i).setZero();
        for (const auto& term : layout.rows[i])
            design.row(i) += term.coeff * psi.block(term.comp).col(term.point).transpose();
    }
    return design;
}

JetBatch scatter_boundary_adjoint(const BoundaryLayout& layout, const MatrixXd& row_adjoint,
                                  int dims) {
    JetBatch adj(row_adjoint.rows(), layout.points.cols(), dims, layout.order);
    for (Index i = 0; i < layout.row_count(); ++i)
        for (const auto& term : layout.rows[i])
            adj.block(term.comp).col(term.point) += term.coeff * row_adjoint.col(i);
    return adj;
}

MatrixXd interior_design(const LinearOperatorSpec& op, const JetBatch& psi) {
    if (op.terms.empty()) throw ConfigError("linear operator has no terms");
    MatrixXd rows_t = MatrixXd::Zero(psi.rows(), psi.points());
    for (const auto& term : op.terms) rows_t += term.coeff * psi.block(term.comp);
    return rows_t.transpose();
}

JetBatch scatter_interior_adjoint(const LinearOperatorSpec& op, const MatrixXd& row_adjoint,
                                  int dims, int order) {
    JetBatch adj(row_adjoint.rows(), row_adjoint.cols(), dims, order);
    for (const auto& term : op.terms) adj.block(term.comp) += term.coeff * row_adjoint;
    return adj;
}

BoundaryRow boundary_row(const PdeProblem& problem, const FeatureBasis& basis,
                         const BoundarySample& sample) {
    CollocationSet single;
    single.boundary.push_back(sample);
    const BoundaryLayout layout = layout_boundary(problem, single);
    basis.validate();
    const JetBatch psi = forward_features(basis, layout.points, layout.order);
    require_finite(psi, "boundary row");
    return {boundary_design(layout, psi).row(0).transpose(), layout.targets(0)};
}

VectorXd evaluate_field(const ScalarField& field, const MatrixXd& points) {
    VectorXd out(points.cols());
    for (Index k = 0; k < points.cols(); ++k) out(k) = field(points.col(k));
    return out;
}

}  // namespace ifef
