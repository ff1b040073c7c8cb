#include <doctest.h>

#include "oracles.hpp"
#include "recdel/sensitivity.hpp"

using namespace recdel;

namespace {

// Small RBF ridge setup shared by several cases.
struct RbfSetup {
  Dataset ds;
  SensKernel kernel = SensKernel::rbf(1.0);
  Vector w;
  Vector x_cf;
  double t = 0.0;
};

RbfSetup make_rbf(Index n, Index d, std::uint64_t seed) {
  RbfSetup s;
  Rng rng(seed);
  s.ds.X = oracles::random_matrix(n, d, rng);
  s.ds.y = oracles::random_vector(n, rng);
  Matrix K(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      K(i, j) = s.kernel(s.ds.X.row(i).transpose(), s.ds.X.row(j).transpose());
    }
  }
  K.diagonal().array() += 0.5;
  s.w = K.llt().solve(s.ds.y);
  s.x_cf = oracles::random_vector(d, rng);
  s.t = kernel_vector(s.kernel, s.ds.X, s.x_cf).dot(s.w);
  return s;
}

}  // namespace

TEST_CASE("build_context linear kernel has the design matrix as Jacobian") {
  Rng rng(101);
  Dataset ds;
  ds.X = oracles::random_matrix(5, 3, rng);
  ds.y = Vector::Zero(5);
  const Vector w = oracles::random_vector(5, rng);
  const Vector x_cf = oracles::random_vector(3, rng);
  const double t = (ds.X * x_cf).dot(w);
  const auto ctx = build_context(ds, SensKernel::linear(), w, x_cf, t);
  CHECK((ctx.J_kX - ds.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ctx.v - ds.X.transpose() * w).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("build_context flags a zero weight vector as degenerate") {
  Dataset ds;
  ds.X = Matrix::Ones(2, 2);
  ds.y = Vector::Zero(2);
  Vector x_cf(2);
  x_cf << 1, 0;
  const auto ctx = build_context(ds, SensKernel::linear(), Vector::Zero(2), x_cf, 0.0);
  CHECK(ctx.degenerate);
  CHECK(ctx.v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_context rejects violated constraints") {
  Dataset ds;
  ds.X = Matrix::Ones(1, 1);
  ds.y = Vector::Zero(1);
  CHECK_THROWS_AS(build_context(ds, SensKernel::linear(), Vector::Ones(1),
                                Vector::Ones(1), 5.0),
                  NumericError);
}

TEST_CASE("build_context rbf Jacobian matches finite differences") {
  const RbfSetup s = make_rbf(5, 2, 102);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  for (Index i = 0; i < 5; ++i) {
    const Vector xi = s.ds.X.row(i).transpose();
    const Vector fd = oracles::fd_gradient(
        [&](const Vector& p) { return s.kernel(p, xi); }, s.x_cf, 1e-6);
    CHECK((ctx.J_kX.row(i).transpose() - fd).norm() / fd.norm() <= 1e-6);
  }
}

TEST_CASE("jacobian_action is zero for perturbations orthogonal to u") {
  const RbfSetup s = make_rbf(6, 2, 103);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  Rng rng(104);
  Vector dw = oracles::random_vector(6, rng);
  dw -= ctx.u * (ctx.u.dot(dw) / ctx.u.squaredNorm());
  CHECK(std::abs(ctx.u.dot(dw)) <= 1e-12);
  CHECK(jacobian_action(ctx, dw).norm() <= 1e-12);
}

TEST_CASE("jacobian_action scalar linear case matches the hand derivative") {
  Dataset ds;
  ds.X = Matrix::Ones(1, 1);
  ds.y = Vector::Zero(1);
  const double w0 = 2.0;
  const double t = 1.0;
  Vector w(1);
  w << w0;
  Vector x_cf(1);
  x_cf << t / w0;
  const auto ctx = build_context(ds, SensKernel::linear(), w, x_cf, t);
  Vector dw(1);
  dw << 1.0;
  const Vector action = jacobian_action(ctx, dw);
  CHECK(action[0] == doctest::Approx(-t / (w0 * w0)).epsilon(1e-14));
}

TEST_CASE("jacobian_action output is parallel to v") {
  const RbfSetup s = make_rbf(7, 3, 105);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  Rng rng(106);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector dw = oracles::random_vector(7, rng);
    const Vector a = jacobian_action(ctx, dw);
    if (a.norm() == 0.0) continue;
    const double cosine = a.dot(ctx.v) / (a.norm() * ctx.v.norm());
    CHECK(std::abs(cosine) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("jacobian_action degenerate cases") {
  // v = 0 and u = 0: a zero Jacobian is the valid answer.
  Dataset ds;
  ds.X.resize(1, 2);
  ds.X << 1, 0;
  ds.y = Vector::Zero(1);
  Vector x_perp(2);
  x_perp << 0, 1;  // k_X(x) = 0 for the linear kernel
  const auto ok_ctx = build_context(ds, SensKernel::linear(), Vector::Zero(1), x_perp, 0.0);
  Vector dw(1);
  dw << 1.0;
  CHECK(jacobian_action(ok_ctx, dw).cwiseAbs().maxCoeff() == 0.0);

  // v = 0 and u != 0: no solution.
  Vector x_hit(2);
  x_hit << 1, 1;
  const auto bad_ctx = build_context(ds, SensKernel::linear(), Vector::Zero(1), x_hit, 0.0);
  CHECK_THROWS_AS(jacobian_action(bad_ctx, dw), NoSolutionError);
}

TEST_CASE("first_order_update honors eps = 0 and normalizes directions") {
  const RbfSetup s = make_rbf(5, 2, 107);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  Rng rng(108);
  const Vector dw = 3.0 * oracles::random_vector(5, rng);
  const auto upd = first_order_update(ctx, dw, 0.0);
  CHECK(upd.x == ctx.x_cf);
  CHECK(upd.normalized);
  CHECK_THROWS_AS(first_order_update(ctx, dw, 0.2), ConfigError);
}

TEST_CASE("first_order_update scalar case is second-order accurate") {
  Dataset ds;
  ds.X = Matrix::Ones(1, 1);
  ds.y = Vector::Zero(1);
  const double w0 = 2.0;
  const double t = 1.0;
  Vector w(1);
  w << w0;
  Vector x_cf(1);
  x_cf << t / w0;
  const auto ctx = build_context(ds, SensKernel::linear(), w, x_cf, t);
  Vector dw(1);
  dw << 1.0;
  const double eps = 1e-4;
  const auto upd = first_order_update(ctx, dw, eps);
  const double exact = t / (w0 + eps);
  CHECK(std::abs(upd.x[0] - exact) <= 1e-8);
}

TEST_CASE("first_order_update tracks the constrained-projection oracle") {
  const RbfSetup s = make_rbf(8, 2, 109);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  Rng rng(110);
  Vector dw = oracles::random_vector(8, rng);
  dw.normalize();
  const double eps = 1e-4;
  const auto upd = first_order_update(ctx, dw, eps);
  const Vector oracle = minimal_change_counterfactual_oracle(
      s.ds, s.kernel, Vector(s.w + eps * dw), s.x_cf, s.t);
  const double moved = (oracle - s.x_cf).norm();
  REQUIRE(moved > 0.0);
  CHECK((upd.x - oracle).norm() / moved <= 10.0 * eps);
}

TEST_CASE("constraint preservation is second order (ratio test)") {
  const RbfSetup s = make_rbf(8, 2, 111);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  Rng rng(112);
  Vector dw = oracles::random_vector(8, rng);
  dw.normalize();
  const auto residual = [&](double eps) {
    const auto upd = first_order_update(ctx, dw, eps);
    return std::abs(kernel_vector(s.kernel, s.ds.X, upd.x).dot(s.w + eps * dw) - s.t);
  };
  const double r1 = residual(1e-4);
  const double r2 = residual(5e-5);
  const double r4 = residual(2.5e-5);
  CHECK(r1 / r2 >= 3.5);
  CHECK(r1 / r2 <= 4.5);
  CHECK(r2 / r4 >= 3.5);
  CHECK(r2 / r4 <= 4.5);
}

TEST_CASE("the rank-one closed form satisfies its constraint to machine precision") {
  const RbfSetup s = make_rbf(8, 3, 113);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  const Matrix Jq = ctx.v * ctx.u.transpose() / ctx.v.squaredNorm();
  CHECK((Jq.transpose() * ctx.v - ctx.u).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the closed form is minimal among feasible Jacobians") {
  const RbfSetup s = make_rbf(6, 3, 114);
  const auto ctx = build_context(s.ds, s.kernel, s.w, s.x_cf, s.t);
  const double vsq = ctx.v.squaredNorm();
  const Matrix Jstar = ctx.v * ctx.u.transpose() / vsq;
  Rng rng(115);
  Vector dw = oracles::random_vector(6, rng);
  dw.normalize();
  const double base = (Jstar * dw).norm();
  for (int trial = 0; trial < 100; ++trial) {
    // Any P with P'v = 0 keeps J = J* + P feasible.
    Matrix P = oracles::random_matrix(3, 6, rng);
    P -= ctx.v * (ctx.v.transpose() * P) / vsq;
    CHECK(((Jstar + P) * dw).norm() >= base - 1e-12);
  }
}

TEST_CASE("oracle returns the start point when already feasible") {
  const RbfSetup s = make_rbf(5, 2, 116);
  const Vector out =
      minimal_change_counterfactual_oracle(s.ds, s.kernel, s.w, s.x_cf, s.t);
  CHECK((out - s.x_cf).norm() <= 1e-10);
}

TEST_CASE("oracle matches the hyperplane projection for linear kernels") {
  Rng rng(117);
  Dataset ds;
  ds.X = oracles::random_matrix(4, 3, rng);
  ds.y = Vector::Zero(4);
  const Vector w = oracles::random_vector(4, rng);
  const Vector a = ds.X.transpose() * w;  // constraint normal
  const Vector x_start = oracles::random_vector(3, rng);
  const double t = a.dot(x_start) + 0.7;
  const Vector out =
      minimal_change_counterfactual_oracle(ds, SensKernel::linear(), w, x_start, t);
  const Vector projection = x_start + a * ((t - a.dot(x_start)) / a.squaredNorm());
  CHECK((out - projection).norm() <= 1e-8);
}

TEST_CASE("custom kernels fall back to finite-difference gradients") {
  const auto quad = [](const Vector& x, const Vector& x2) {
    const double v = x.dot(x2);
    return v * v;
  };
  const SensKernel k = SensKernel::custom(quad);
  Vector x(2);
  x << 1.0, 2.0;
  Vector x2(2);
  x2 << 0.5, -1.0;
  const Vector expected = 2.0 * x.dot(x2) * x2;
  CHECK((k.grad_x(x, x2) - expected).norm() <= 1e-5);
}
