#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ifef/features.hpp"

namespace ifef {

using ScalarField = std::function<double(const VectorXd&)>;
using JetField = std::function<Jet2(const VectorXd&)>;

/// Axis-aligned box [lo_i, hi_i].
struct Box {
    VectorXd lo, hi;

    int dims() const { return static_cast<int>(lo.size()); }
    double extent(int axis) const { return hi(axis) - lo(axis); }
    bool contains(const VectorXd& x, double tol = 1e-12) const;
};

struct JetTerm {
    Component comp;
    double coeff = 1.0;
};

/// sum_k coeff_k * D_k u, with D_k one of {value, d/dx_i, d2/dx_i^2}.
struct LinearOperatorSpec {
    std::vector<JetTerm> terms;
};

/// u_t + kappa * u * u_x - nu * u_xx. kappa = 1 is Burgers; kappa = 0 drops
/// the nonlinearity (used to cross-check the iterative solver).
struct NonlinearBurgers {
    double nu = 0.01;
    double nonlinearity = 1.0;
    int x_axis = 0;
    int t_axis = 1;
};

using InteriorOperator = std::variant<LinearOperatorSpec, NonlinearBurgers>;

/// Conditions live on box faces. Dirichlet/Initial pin u = g on the face
/// {x_axis = lo or hi}. PeriodicPair ties the lo and hi faces of `axis`:
/// order 0 matches values, order 1 matches d/dx_axis.
struct BoundaryCondition {
    enum class Kind { Dirichlet, Initial, PeriodicPair };
    Kind kind = Kind::Dirichlet;
    int axis = 0;
    bool upper = false;        // which face, Dirichlet/Initial only
    int derivative_order = 0;  // PeriodicPair only
    ScalarField target;        // Dirichlet/Initial only
    std::string name;
};

struct PdeProblem {
    std::string name;
    Box domain;
    InteriorOperator op;
    std::vector<BoundaryCondition> conditions;
    ScalarField source;
    std::optional<ScalarField> exact;
    std::optional<JetField> exact_jet;
    std::vector<std::string> axis_names;
    std::map<std::string, double> parameters;

    int dims() const { return domain.dims(); }
    bool is_linear() const { return std::holds_alternative<LinearOperatorSpec>(op); }
    int interior_order() const;
    int boundary_order() const;
};

/// 𝔉[u](x) - f(x) for the jet of u at x.
double interior_residual(const PdeProblem& problem, const Jet2& u, const VectorXd& x);

/// 𝔉[u](x) alone (no source).
double apply_operator(const InteriorOperator& op, const Jet2& u);

// ---- benchmark problems; points are (x, y) or (x, t) ----

PdeProblem make_helmholtz(double a1, double a2, const Box& domain);
PdeProblem make_convection(double beta);
/// Convection on [0,1]x[0,1] with u(x,0) = sum A_i sin(2 pi f_i x), periodic in x.
PdeProblem make_multisine_convection(double beta, const std::vector<double>& frequencies,
                                     const std::vector<double>& amplitudes);
PdeProblem make_convection_diffusion(double c, double d, double a_low, double a_high, double k_low,
                                     double k_high);
PdeProblem make_burgers(double nu, double nonlinearity = 1.0);

// ---- collocation ----

struct BoundarySample {
    int condition = -1;  // index into PdeProblem::conditions
    VectorXd a;
    VectorXd b;  // second point of a periodic pair, empty otherwise
};

struct CollocationSet {
    std::vector<BoundarySample> boundary;
    MatrixXd interior;  // n x N_f
    std::uint64_t seed = 0;
    std::string sampler;

    Index boundary_rows() const { return static_cast<Index>(boundary.size()); }
    Index interior_points() const { return interior.cols(); }
};

/// Tensor-product grid with counts[i] points per axis, endpoints included,
/// axis 0 varying fastest.
MatrixXd tensor_grid(const Box& box, const std::vector<int>& counts);

/// Faces that share one slice of the boundary budget. A Dirichlet/Initial
/// condition is its own group; all periodic conditions on one axis share a
/// group whose samples are point pairs (one row per condition per pair).
struct BoundaryGroup {
    std::vector<int> conditions;
    bool periodic = false;
    int axis = 0;
    bool upper = false;
    double measure = 0.0;  // both faces for a periodic group
    Index samples = 0;     // points, or pairs for a periodic group
};

/// Face measure used to split boundary budgets: on the domain box mapped to
/// [-1, 1]^n (every face equal), or in physical units.
enum class FaceMeasure { Normalized, Physical };

FaceMeasure parse_face_measure(const std::string& name);
std::string to_string(FaceMeasure m);

/// Splits `total` boundary points over groups proportionally to face measure.
std::vector<BoundaryGroup> split_boundary_budget(const PdeProblem& problem, Index total,
                                                 FaceMeasure measure = FaceMeasure::Normalized);

/// Interior on a tensor grid; faces on evenly spaced points.
CollocationSet sample_uniform(const PdeProblem& problem, const std::vector<int>& interior_counts,
                              Index boundary_points, std::uint64_t seed,
                              FaceMeasure measure = FaceMeasure::Normalized);

/// Latin hypercube: each axis split into N equal bins with one sample per bin.
MatrixXd latin_hypercube(const Box& box, Index count, std::uint64_t seed);
CollocationSet sample_lhs(const PdeProblem& problem, Index boundary_points, Index interior_points,
                          std::uint64_t seed, FaceMeasure measure = FaceMeasure::Normalized);

// ---- design rows ----

/// Nonlinear rows cannot be reduced to a coefficient vector; they keep the
/// feature jets and evaluate the residual for a given theta.
struct NonlinearResidualRow {
    VectorXd value, dt, dx, dxx;
    NonlinearBurgers op;
    double source = 0.0;

    double operator()(const VectorXd& theta) const;
};

std::variant<VectorXd, NonlinearResidualRow> residual_row(const PdeProblem& problem,
                                                          const FeatureBasis& basis,
                                                          const VectorXd& x);

struct BoundaryRow {
    VectorXd coeffs;
    double target = 0.0;
};

BoundaryRow boundary_row(const PdeProblem& problem, const FeatureBasis& basis,
                         const BoundarySample& sample);

/// Boundary rows flattened onto a point matrix: row i is
/// sum_t coeff_t * psi_{comp_t}(points[:, point_t]).
struct BoundaryLayout {
    struct Term {
        Index point;
        Component comp;
        double coeff;
    };
    MatrixXd points;
    std::vector<std::vector<Term>> rows;
    VectorXd targets;
    int order = 0;

    Index row_count() const { return static_cast<Index>(rows.size()); }
};

BoundaryLayout layout_boundary(const PdeProblem& problem, const CollocationSet& collocation);

/// N_u x F design matrix B_u from feature jets at layout.points.
MatrixXd boundary_design(const BoundaryLayout& layout, const JetBatch& psi);

/// Feature-jet adjoint from per-row adjoints (F x N_u, column i = dS/d row_i).
JetBatch scatter_boundary_adjoint(const BoundaryLayout& layout, const MatrixXd& row_adjoint,
                                  int dims);

/// N x F residual design rows of a linear operator from feature jets.
MatrixXd interior_design(const LinearOperatorSpec& op, const JetBatch& psi);

/// Feature-jet adjoint for a linear operator from per-row adjoints (F x N).
JetBatch scatter_interior_adjoint(const LinearOperatorSpec& op, const MatrixXd& row_adjoint,
                                  int dims, int order);

VectorXd evaluate_field(const ScalarField& field, const MatrixXd& points);

}  // namespace ifef
