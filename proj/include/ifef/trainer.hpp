#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ifef/eval.hpp"
#include "ifef/optim.hpp"
#include "ifef/qp.hpp"

namespace ifef {

enum class Variant { Ifef, IfefPd, Vanilla };
enum class Extension { Rff, None };
enum class UpperOptimizer { Adam, Gradient };

std::string to_string(Variant v);
std::string to_string(Extension e);
Variant parse_variant(const std::string& s);
Extension parse_extension(const std::string& s);

struct TrainConfig {
    double lambda_pretrain = 0.01;
    double lambda_ll = 1e-2;
    std::optional<double> lambda_upper;  // physics weight of the upper loss; lambda_ll if unset
    double gamma = 1e-7;
    Index D = 800;
    double sigma = 1.0;
    int pretrain_epochs = 5000;
    int ifef_epochs = 2000;
    double pretrain_lr = 1e-3;
    double upper_lr = 1e-3;
    UpperOptimizer upper_optimizer = UpperOptimizer::Adam;
    double dual_lr = 1e-4;
    double lambda_min = 1e-8;
    double lambda_max = 1e8;
    Extension extension = Extension::Rff;
    Variant variant = Variant::Ifef;
    std::uint64_t seed = 0;
    NonlinearSolveOptions nonlinear_lower;
    int eval_every = 1;
    bool record_wall_time = false;

    double upper_lambda() const { return lambda_upper.value_or(lambda_ll); }
    /// Seed of B_D; derived from `seed` so one number fixes a run.
    std::uint64_t rff_seed() const { return seed * 0x9E3779B97F4A7C15ULL + 0x5EEDULL; }
    void validate() const;
};

/// Feature jets and design rows of one basis on one collocation set.
struct FeatureEvaluation {
    JetBatch psi_boundary, psi_interior;
    FeatureCache cache_boundary, cache_interior;
    MatrixXd B_u;
    MatrixXd R_f;               // linear operators
    NonlinearDesign nonlinear;  // Burgers-type operators
    bool cached = false;
};

/// The sampled PINN loss of a problem on a fixed collocation set, viewed as
/// a function of the basis (omega) and the readout (theta or W).
class PinnObjective {
public:
    PinnObjective(PdeProblem problem, CollocationSet collocation);

    const PdeProblem& problem() const { return problem_; }
    const CollocationSet& collocation() const { return collocation_; }
    const BoundaryLayout& layout() const { return layout_; }
    const VectorXd& source() const { return source_; }
    Index rows() const { return layout_.row_count() + collocation_.interior_points(); }

    /// With `keep_cache` the forward caches are retained for gradients;
    /// without, the interior is processed in chunks and only design rows kept.
    FeatureEvaluation evaluate(const FeatureBasis& basis, bool keep_cache,
                               Index chunk = 4096) const;

    QpSystem assemble(const FeatureEvaluation& ev, double lambda) const;
    /// Linear operators only: Q, c, b accumulated over interior chunks
    /// without materializing R_f. Memory is O(F^2 + chunk * F).
    QpSystem assemble_streaming(const FeatureBasis& basis, double lambda, Index chunk = 1024) const;

    /// Sampled loss of u = readout . psi with physics weight lambda.
    double loss(const FeatureEvaluation& ev, const VectorXd& readout, double lambda) const;
    /// Mean squared interior residual.
    double mean_physics_residual(const FeatureEvaluation& ev, const VectorXd& readout) const;

    /// dL/d omega at fixed readout (hidden parameters, flat order).
    VectorXd omega_gradient(const FeatureBasis& basis, const FeatureEvaluation& ev,
                            const VectorXd& readout, double lambda) const;
    /// dL/d readout at fixed omega.
    VectorXd readout_gradient(const FeatureEvaluation& ev, const VectorXd& readout,
                              double lambda) const;

    /// Gradient over hidden parameters of a scalar whose adjoints with respect
    /// to the boundary rows (F x N_u) and interior feature jets are given.
    VectorXd backprop(const FeatureBasis& basis, const FeatureEvaluation& ev,
                      const MatrixXd& boundary_row_adjoint,
                      const JetBatch& interior_adjoint) const;

    /// Interior feature-jet adjoint of the physics term for u = readout . psi:
    /// weight * sum_j r_j^2 differentiated with respect to psi.
    JetBatch interior_loss_adjoint(const FeatureEvaluation& ev, const VectorXd& readout,
                                   double weight) const;

private:
    PdeProblem problem_;
    CollocationSet collocation_;
    BoundaryLayout layout_;
    VectorXd source_;
};

/// Reference values for relative-L2 evaluation.
struct EvalTarget {
    MatrixXd points;
    VectorXd exact;
    std::vector<int> grid;

    bool empty() const { return exact.size() == 0; }
};

struct EpochMetrics {
    int epoch = 0;
    double lower_loss = 0.0;       // L_lower(theta_{k+1} | omega_k)
    double lower_loss_prev = 0.0;  // L_lower(theta_k | omega_k); NaN at k = 0
    double upper_loss = 0.0;       // L_upper(omega_k | theta_{k+1})
    double rel_l2 = 0.0;           // NaN when not evaluated
    double lambda = 0.0;           // upper physics weight in force
    double wall_ms = 0.0;
};

struct PretrainResult {
    NetworkParams params;
    std::vector<EpochMetrics> metrics;
};

/// Loss of the vanilla network u = W h_omega and, when `grad` is given, its
/// gradient over all parameters in flat order (hidden layers, then W).
double vanilla_loss(const PinnObjective& objective, const NetworkParams& params, double lambda,
                    VectorXd* grad = nullptr);

/// Vanilla PINN warm start: Adam on (omega, W) over the sampled loss with
/// lambda_pretrain. Zero epochs returns params0 unchanged.
PretrainResult pretrain_vanilla(const PinnObjective& objective, const NetworkParams& params0,
                                const TrainConfig& config, const EvalTarget* target = nullptr,
                                int epochs = -1);

/// One upper-level optimizer step on omega at fixed theta.
class UpperStepper {
public:
    UpperStepper(UpperOptimizer kind, double lr) : kind_(kind), lr_(lr), adam_(lr) {}
    /// Returns the loss at the incoming omega.
    double step(const PinnObjective& objective, FeatureBasis& basis, const FeatureEvaluation& ev,
                const VectorXd& theta, double lambda);

private:
    UpperOptimizer kind_;
    double lr_;
    Adam adam_;
};

/// Convenience single step from scratch (evaluates features itself).
NetworkParams upper_step(const NetworkParams& omega, const VectorXd& theta,
                         const PinnObjective& objective, const FeatureBasis& basis_template,
                         double lr, double lambda, UpperOptimizer kind = UpperOptimizer::Gradient);

/// Lower update at the current basis: closed form for linear operators,
/// adaptive-moment descent from `theta_prev` (or the kappa = 0 closed form
/// when empty) for Burgers.
VectorXd lower_solve(const PinnObjective& objective, const FeatureEvaluation& ev,
                     const TrainConfig& config, const VectorXd& theta_prev);

/// Total derivative of omega -> L_upper(omega, theta*(omega)) by the
/// implicit function theorem. Linear problems only.
VectorXd hypergradient_ift(const PinnObjective& objective, const FeatureBasis& basis,
                           const TrainConfig& config);

/// lambda + dual_lr * residual, clamped to [lo, hi].
double primal_dual_update(double lambda, double physics_residual_mean, double dual_lr,
                          double lo = 1e-8, double hi = 1e8);

struct IfefResult {
    FeatureBasis basis;
    VectorXd theta;
    std::vector<EpochMetrics> metrics;
    double final_rel_l2 = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Bi-level loop: per epoch solve theta at omega_k, then one upper step on
/// omega at that theta. B_D stays fixed. Returns omega_N and theta*(omega_N).
IfefResult ifef_train(const PinnObjective& objective, FeatureBasis basis0,
                      const TrainConfig& config, const EvalTarget* target = nullptr,
                      const EpochCallback& on_epoch = {});

/// Builds the basis for a run: hidden stack of `params` plus B_D when the
/// extension is enabled.
FeatureBasis make_basis(const NetworkParams& params, const TrainConfig& config);

}  // namespace ifef
