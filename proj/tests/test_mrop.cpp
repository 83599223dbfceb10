#include "hbrbf/mrop.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hbrbf/geometry.hpp"
#include "hbrbf/hbasis.hpp"
#include "hbrbf/kernels.hpp"
#include "helpers.hpp"

using namespace hbrbf;

namespace {

struct Pipeline {
  NodeSet X;
  HBTransform hb;
  MultiResOperator op;

  Pipeline(int n, std::uint64_t seed, const KernelSpec& kernel, int m, int p)
      : X(make_nodes(n, seed)),
        hb(build_hb(build_octree(X, poly_dim(p)), X, m, p)),
        op(hb, X, kernel) {}

  static NodeSet make_nodes(int n, std::uint64_t seed) {
    NodeSet raw;
    raw.points = testutil::random_points(n, seed);
    return normalize_nodes(raw).first;
  }
};

// Dense block-SSOR oracle (L^H + D) D^{-1} (L + D) with the strict block
// lower triangle L taken from the exact operator and D supplied per block.
Eigen::MatrixXd dense_ssor_matrix(const MultiResOperator& op,
                                  const std::vector<SparseBlock>& dblocks) {
  const Eigen::MatrixXd kw = dense_KW(op);
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(op.dim, op.dim);
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(op.dim, op.dim);
  for (std::size_t t = 0; t < op.blocks.size(); ++t) {
    const auto& lb = op.blocks[t];
    const int w = lb.end - lb.begin;
    if (w == 0) continue;
    diag.block(lb.begin, lb.begin, w, w) = Eigen::MatrixXd(dblocks[t].mat);
    lower.block(lb.begin, 0, w, lb.begin) =
        kw.block(lb.begin, 0, w, lb.begin);
  }
  return (lower.transpose() + diag) * diag.inverse() * (lower + diag);
}

}  // namespace

TEST_CASE("reduced operator matches the dense triple product") {
  Pipeline pl(200, 3, KernelSpec::biharmonic(), 0, 1);
  REQUIRE(pl.op.dim == 199);

  const Eigen::MatrixXd kw = dense_KW(pl.op);

  SECTION("zero maps to zero") {
    CHECK(matvec_KW(pl.op, Eigen::VectorXd::Zero(pl.op.dim)).norm() == 0.0);
  }

  SECTION("canonical probe equals an oracle column") {
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(pl.op.dim);
    e1[1] = 1.0;
    const Eigen::VectorXd got = matvec_KW(pl.op, e1);
    CHECK((got - kw.col(1)).norm() <= 1e-10 * kw.col(1).norm());
  }

  SECTION("random probes across kernels and orders") {
    for (const KernelSpec& kernel :
         {KernelSpec::biharmonic(), KernelSpec::multiquadric(0.1),
          KernelSpec::inverse_multiquadric(0.05, 1.0)}) {
      Pipeline q(350, 11, kernel, 1, 3);
      const Eigen::MatrixXd kq = dense_KW(q.op);
      const Eigen::VectorXd a = testutil::random_vector(q.op.dim, 5);
      const Eigen::VectorXd got = matvec_KW(q.op, a);
      CHECK((got - kq * a).norm() <= 1e-9 * (kq * a).norm());
    }
  }

  SECTION("operator symmetry on random probes") {
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd a = testutil::random_vector(pl.op.dim, 100 + trial);
      const Eigen::VectorXd b = testutil::random_vector(pl.op.dim, 200 + trial);
      const double lhs = b.dot(matvec_KW(pl.op, a));
      const double rhs = a.dot(matvec_KW(pl.op, b));
      CHECK(std::abs(lhs - rhs) <= 1e-9 * a.norm() * b.norm());
    }
  }

  SECTION("definiteness sign is constant on the reduced space") {
    int negatives = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd a = testutil::random_vector(pl.op.dim, 300 + trial);
      if (a.dot(matvec_KW(pl.op, a)) < 0.0) ++negatives;
    }
    CHECK(negatives == 100);  // biharmonic convention: negative definite
    CHECK(pl.op.sign == -1.0);
  }

  SECTION("length mismatch is rejected") {
    CHECK_THROWS_AS(matvec_KW(pl.op, Eigen::VectorXd::Zero(3)), ContractError);
  }
}

TEST_CASE("pipeline is bit-identical under uniform input scaling") {
  NodeSet raw;
  raw.points = testutil::random_points(300, 21);
  NodeSet scaled = raw;
  for (Vec3& x : scaled.points) x *= 4.0;  // exact in floating point

  auto [xa, na] = normalize_nodes(raw);
  auto [xb, nb] = normalize_nodes(scaled);
  REQUIRE(xa.size() == xb.size());
  for (int i = 0; i < xa.size(); ++i)
    CHECK(xa.points[i] == xb.points[i]);  // bitwise equality

  auto hba = build_hb(build_octree(xa, poly_dim(2)), xa, 0, 2);
  auto hbb = build_hb(build_octree(xb, poly_dim(2)), xb, 0, 2);
  MultiResOperator opa(hba, xa, KernelSpec::biharmonic());
  MultiResOperator opb(hbb, xb, KernelSpec::biharmonic());
  const Eigen::VectorXd a = testutil::random_vector(opa.dim, 9);
  const Eigen::VectorXd ya = matvec_KW(opa, a);
  const Eigen::VectorXd yb = matvec_KW(opb, a);
  CHECK((ya.array() == yb.array()).all());
}

TEST_CASE("sparse diagonal blocks") {
  SECTION("a level with a single box is reproduced exactly") {
    Pipeline pl(150, 7, KernelSpec::biharmonic(), 0, 1);
    const auto blocks = build_sparse_diag_blocks(pl.op);
    const Eigen::MatrixXd kw = dense_KW(pl.op);
    // Level 0 has the root box only: every pair is admissible.
    for (std::size_t t = 0; t < pl.op.blocks.size(); ++t) {
      if (pl.op.blocks[t].level != 0) continue;
      const auto& lb = pl.op.blocks[t];
      const int w = lb.end - lb.begin;
      const Eigen::MatrixXd got(blocks[t].mat);
      const Eigen::MatrixXd want = kw.block(lb.begin, lb.begin, w, w);
      CHECK((got - want).cwiseAbs().maxCoeff() <=
            1e-11 * want.cwiseAbs().maxCoeff());
    }
  }

  SECTION("computed entries match the dense oracle; pattern is symmetric") {
    Pipeline pl(500, 13, KernelSpec::biharmonic(), 3, 3);
    const auto blocks = build_sparse_diag_blocks(pl.op);
    const Eigen::MatrixXd kw = dense_KW(pl.op);
    const std::size_t cap = 8ull * poly_dim(3) * 343ull;

    for (std::size_t t = 0; t < pl.op.blocks.size(); ++t) {
      const auto& lb = pl.op.blocks[t];
      const int w = lb.end - lb.begin;
      if (w == 0) continue;
      const Eigen::MatrixXd want = kw.block(lb.begin, lb.begin, w, w);
      const double scale = want.cwiseAbs().maxCoeff();
      const Eigen::SparseMatrix<double>& sm = blocks[t].mat;
      CHECK(blocks[t].max_row_nnz() <= cap);
      for (int k = 0; k < sm.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sm, k); it; ++it) {
          CHECK(std::abs(it.value() - want(it.row(), it.col())) <=
                1e-11 * scale);
          CHECK(sm.coeff(it.col(), it.row()) == it.value());
        }
    }
  }

  SECTION("a tightened criterion omits only small far-field entries") {
    Pipeline pl(600, 17, KernelSpec::biharmonic(), 0, 0);
    const auto blocks = build_sparse_diag_blocks(pl.op, 0.25);
    const Eigen::MatrixXd kw = dense_KW(pl.op);
    bool omitted_any = false;
    for (std::size_t t = 0; t < pl.op.blocks.size(); ++t) {
      const auto& lb = pl.op.blocks[t];
      const int w = lb.end - lb.begin;
      if (w == 0 || lb.level < 0) continue;
      const Eigen::MatrixXd want = kw.block(lb.begin, lb.begin, w, w);
      const Eigen::MatrixXd got(blocks[t].mat);
      for (int i = 0; i < w; ++i) {
        const double row_max = got.row(i).cwiseAbs().maxCoeff();
        for (int j = 0; j < w; ++j) {
          if (got(i, j) == 0.0 && want(i, j) != 0.0) {
            omitted_any = true;
            CHECK(std::abs(want(i, j)) < row_max);
          }
        }
      }
    }
    CHECK(omitted_any);
  }
}

TEST_CASE("diagonal preconditioner") {
  SECTION("one-dimensional reduced space") {
    NodeSet raw;
    raw.points = {Vec3(0, 0, 0), Vec3(1, 0.4, 0.2)};
    auto X = normalize_nodes(raw).first;
    auto hb = build_hb(build_octree(X, poly_dim(0)), X, 0, 0);
    MultiResOperator op(hb, X, KernelSpec::biharmonic());
    REQUIRE(op.dim == 1);
    const Eigen::VectorXd diag = diag_preconditioner(op);
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(2);
    hb.cols[0].add_scaled(1.0, psi);
    const Eigen::MatrixXd kd = kernel_matrix(op.K.spec(), X.points);
    CHECK_THAT(diag[0], Catch::Matchers::WithinRel(
                            std::abs(psi.dot(kd * psi)), 1e-12));
  }

  SECTION("matches the dense diagonal in magnitude") {
    Pipeline pl(300, 19, KernelSpec::biharmonic(), 0, 1);
    const Eigen::VectorXd diag = diag_preconditioner(pl.op);
    const Eigen::VectorXd want = dense_KW(pl.op).diagonal().cwiseAbs();
    CHECK((diag - want).cwiseAbs().maxCoeff() <=
          1e-11 * want.maxCoeff());
  }

  SECTION("strictly positive across random instances and kernels") {
    const KernelSpec kernels[] = {KernelSpec::biharmonic(),
                                  KernelSpec::multiquadric(0.2),
                                  KernelSpec::inverse_multiquadric(0.01, 0.01)};
    for (int trial = 0; trial < 20; ++trial) {
      Pipeline pl(100, 400 + trial, kernels[trial % 3], 0, 1);
      const Eigen::VectorXd diag = diag_preconditioner(pl.op);
      CHECK(diag.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("block SSOR application") {
  SECTION("a single nonempty block reduces to one inner solve") {
    // N = M(p): no details anywhere, only the complement block survives.
    Pipeline pl(poly_dim(2), 23, KernelSpec::biharmonic(), 0, 2);
    REQUIRE(pl.op.dim == poly_dim(2) - 1);
    const auto blocks = build_sparse_diag_blocks(pl.op);
    const Eigen::VectorXd beta = testutil::random_vector(pl.op.dim, 31);
    SsorOptions so;
    so.inner_tol = 1e-12;
    const Eigen::VectorXd got = apply_ssor_inverse(blocks, pl.op, beta, so);
    // With one block, P = D, so the result is just D^{-1} beta.
    Eigen::MatrixXd d(blocks.back().mat);
    const Eigen::VectorXd want = d.fullPivLu().solve(beta);
    CHECK((got - want).norm() <= 1e-8 * want.norm());
  }

  SECTION("matches the dense SSOR oracle") {
    Pipeline pl(300, 29, KernelSpec::biharmonic(), 0, 1);
    const Eigen::VectorXd beta = testutil::random_vector(pl.op.dim, 37);

    const auto exact = build_exact_diag_blocks(pl.op);
    const Eigen::MatrixXd oracle = dense_ssor_matrix(pl.op, exact);

    SECTION("default inner tolerance") {
      const Eigen::VectorXd got = apply_ssor_inverse(exact, pl.op, beta);
      const Eigen::VectorXd want = oracle.fullPivLu().solve(beta);
      CHECK((got - want).norm() <= 1e-5 * want.norm());
    }

    SECTION("tight inner tolerance, sparse diagonal blocks") {
      const auto sparse = build_sparse_diag_blocks(pl.op);
      const Eigen::MatrixXd oracle_sparse = dense_ssor_matrix(pl.op, sparse);
      SsorOptions so;
      so.inner_tol = 1e-12;
      SsorStats stats;
      const Eigen::VectorXd got =
          apply_ssor_inverse(sparse, pl.op, beta, so, &stats);
      const Eigen::VectorXd want = oracle_sparse.fullPivLu().solve(beta);
      CHECK((got - want).norm() <= 1e-9 * want.norm());
      CHECK(!stats.cap_hit);
      long total = 0;
      for (long it : stats.inner_iterations) total += it;
      CHECK(total > 0);
    }

    SECTION("the implied preconditioner is symmetric") {
      SsorOptions so;
      so.inner_tol = 1e-13;
      for (int trial = 0; trial < 3; ++trial) {
        const Eigen::VectorXd a = testutil::random_vector(pl.op.dim, 50 + trial);
        const Eigen::VectorXd b = testutil::random_vector(pl.op.dim, 60 + trial);
        const double lhs = b.dot(apply_ssor_inverse(exact, pl.op, a, so));
        const double rhs = a.dot(apply_ssor_inverse(exact, pl.op, b, so));
        CHECK(std::abs(lhs - rhs) <= 1e-7 * a.norm() * b.norm());
      }
    }
  }

  SECTION("inner cap policy") {
    Pipeline pl(200, 41, KernelSpec::biharmonic(), 0, 1);
    const auto blocks = build_sparse_diag_blocks(pl.op);
    const Eigen::VectorXd beta = testutil::random_vector(pl.op.dim, 43);
    SsorOptions so;
    so.inner_cap = 1;
    CHECK_THROWS_AS(apply_ssor_inverse(blocks, pl.op, beta, so), NumericError);
    so.throw_on_cap = false;
    SsorStats stats;
    CHECK_NOTHROW(apply_ssor_inverse(blocks, pl.op, beta, so, &stats));
    CHECK(stats.cap_hit);
  }
}

TEST_CASE("entry decay across box distances") {
  // Same nodes, two detail orders; higher p must decay faster off-diagonal.
  NodeSet raw;
  raw.points = testutil::random_points(800, 47);
  auto X = normalize_nodes(raw).first;

  auto hb0 = build_hb(build_octree(X, poly_dim(0)), X, 0, 0);
  auto hb1 = build_hb(build_octree(X, poly_dim(1)), X, 1, 1);
  MultiResOperator op0(hb0, X, KernelSpec::biharmonic());
  MultiResOperator op1(hb1, X, KernelSpec::biharmonic());

  const int level = 2;
  const auto prof0 = decay_profile(op0, level);
  const auto prof1 = decay_profile(op1, level);
  REQUIRE(!prof0.empty());
  REQUIRE(!prof1.empty());

  const double h = std::ldexp(1.0, -level);
  auto near_max = [&](const std::vector<DecayBin>& prof) {
    double best = 0.0;
    for (const DecayBin& bin : prof)
      if (bin.distance <= std::sqrt(3.0) * h + 1e-12)
        best = std::max(best, bin.max_abs);
    return best;
  };
  auto far_max = [&](const std::vector<DecayBin>& prof) {
    double best = 0.0;
    for (const DecayBin& bin : prof)
      if (bin.distance > 2.0 * h) best = std::max(best, bin.max_abs);
    return best;
  };

  SECTION("the adjacency shell carries the largest entries") {
    for (const auto* prof : {&prof0, &prof1}) {
      double global = 0.0;
      for (const DecayBin& bin : *prof) global = std::max(global, bin.max_abs);
      CHECK(near_max(*prof) == global);
    }
  }

  SECTION("far-field ratio shrinks with the vanishing-moment order") {
    const double r0 = far_max(prof0) / near_max(prof0);
    const double r1 = far_max(prof1) / near_max(prof1);
    CHECK(far_max(prof0) > 0.0);
    CHECK(far_max(prof1) > 0.0);
    CHECK(r1 < r0);
  }

  SECTION("bins are sorted and positive") {
    for (std::size_t i = 1; i < prof0.size(); ++i)
      CHECK(prof0[i].distance > prof0[i - 1].distance);
  }
}
