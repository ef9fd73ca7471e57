#include "aodret/simgen.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aodret {

void SimConfig::validate() const {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("sim config: dimensions must be positive");
    if (!(kappa_true > 0.0))
        throw std::invalid_argument("sim config: kappa_true must be positive");
    if (alpha_true.empty())
        throw std::invalid_argument("sim config: alpha_true is empty");
    for (double a : alpha_true)
        if (!(a > 0.0))
            throw std::invalid_argument("sim config: alpha_true must be positive");
    if (!(noise_fraction >= 0.0))
        throw std::invalid_argument("sim config: negative noise fraction");
    if (!clear_mask.empty() &&
        clear_mask.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("sim config: mask length != rows*cols");
}

namespace {

// Connected components of the clear-pixel graph.
std::vector<int> components_of(const Adjacency& adj, int& n_components) {
    const int P = adj.pixel_count();
    std::vector<int> comp(P, -1);
    n_components = 0;
    std::vector<int> stack;
    for (int s = 0; s < P; ++s) {
        if (comp[s] >= 0) continue;
        comp[s] = n_components;
        stack.push_back(s);
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            for (int q : adj.neighbors_of(p))
                if (comp[q] < 0) {
                    comp[q] = n_components;
                    stack.push_back(q);
                }
        }
        ++n_components;
    }
    return comp;
}

// Separable draw on a full-clear rows x cols lattice. Coefficients are drawn
// in row-major (k1, k2) order so the output is seed-stable.
std::vector<double> sample_full_rectangle(int rows, int cols, double kappa,
                                          Rng& rng) {
    const auto path_eigenvalues = [](int n) {
        std::vector<double> lam(n);
        for (int k = 0; k < n; ++k) {
            const double s = std::sin(0.5 * M_PI * k / n);
            lam[k] = 4.0 * s * s;
        }
        return lam;
    };
    const auto path_basis = [](int n) {
        Eigen::MatrixXd v(n, n);
        for (int k = 0; k < n; ++k) {
            const double norm = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            for (int i = 0; i < n; ++i)
                v(i, k) = norm * std::cos(M_PI * k * (i + 0.5) / n);
        }
        return v;
    };

    const std::vector<double> lam_r = path_eigenvalues(rows);
    const std::vector<double> lam_c = path_eigenvalues(cols);
    Eigen::MatrixXd coeff(rows, cols);
    for (int k1 = 0; k1 < rows; ++k1)
        for (int k2 = 0; k2 < cols; ++k2) {
            const double lam = lam_r[k1] + lam_c[k2];
            coeff(k1, k2) =
                lam > 0.0 ? rng.normal(0.0, 1.0 / std::sqrt(kappa * lam)) : 0.0;
        }
    const Eigen::MatrixXd field =
        path_basis(rows) * coeff * path_basis(cols).transpose();

    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[static_cast<std::size_t>(r) * cols + c] = field(r, c);
    return out;
}

constexpr int kDenseGmrfCap = 4096;

// Dense eigendecomposition of the graph Laplacian restricted to the pixels
// listed in `members` (indices into the clear-pixel numbering).
void sample_component_dense(const Adjacency& adj, const std::vector<int>& members,
                            double kappa, Rng& rng, std::vector<double>& field) {
    const int n = static_cast<int>(members.size());
    if (n == 1) {
        field[members[0]] = 0.0;
        return;
    }
    std::vector<int> local(adj.pixel_count(), -1);
    for (int i = 0; i < n; ++i) local[members[i]] = i;

    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int p = members[i];
        for (int q : adj.neighbors_of(p)) {
            const int j = local[q];
            if (j < 0) continue;
            lap(i, i) += 1.0;
            lap(i, j) -= 1.0;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("sample_gmrf: eigendecomposition failed");
    const Eigen::VectorXd& lam = solver.eigenvalues();
    const Eigen::MatrixXd& vec = solver.eigenvectors();
    const double tol = 1e-9 * std::max(1.0, lam(n - 1));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (lam(i) <= tol) continue; // flat direction pinned to zero
        x += rng.normal(0.0, 1.0 / std::sqrt(kappa * lam(i))) * vec.col(i);
    }
    for (int i = 0; i < n; ++i) field[members[i]] = x(i);
}

} // namespace

std::vector<double> sample_gmrf(const BlockGrid& grid, const Adjacency& adj,
                                double kappa, double center, double lo, double hi,
                                Rng& rng, bool allow_disconnected,
                                int* clip_count) {
    if (!(kappa > 0.0))
        throw std::invalid_argument("sample_gmrf: kappa must be positive");
    if (!(lo < hi)) throw std::invalid_argument("sample_gmrf: empty support");
    const int P = grid.clear_count();
    std::vector<double> field(P, 0.0);

    const bool full = P == grid.cell_count();
    if (full) {
        field = sample_full_rectangle(grid.rows(), grid.cols(), kappa, rng);
    } else {
        int n_components = 0;
        const std::vector<int> comp = components_of(adj, n_components);
        if (n_components > 1 && !allow_disconnected)
            throw std::invalid_argument(
                "sample_gmrf: clear lattice is disconnected (" +
                std::to_string(n_components) + " components)");
        if (P > kDenseGmrfCap)
            throw std::invalid_argument(
                "sample_gmrf: masked grid too large for dense decomposition");
        std::vector<std::vector<int>> members(n_components);
        for (int p = 0; p < P; ++p) members[comp[p]].push_back(p);
        for (const auto& ms : members)
            sample_component_dense(adj, ms, kappa, rng, field);
    }

    int clips = 0;
    for (double& v : field) {
        v += center;
        if (v < lo) {
            v = lo;
            ++clips;
        } else if (v > hi) {
            v = hi;
            ++clips;
        }
    }
    if (clip_count) *clip_count = clips;
    return field;
}

std::vector<double> sample_theta_field(int pixel_count,
                                       std::span<const double> alpha, Rng& rng) {
    const int M = static_cast<int>(alpha.size());
    std::vector<double> field(static_cast<std::size_t>(pixel_count) * M);
    for (int p = 0; p < pixel_count; ++p)
        rng.dirichlet(alpha, std::span<double>(
                                 field.data() + static_cast<std::size_t>(p) * M,
                                 static_cast<std::size_t>(M)));
    return field;
}

SimulatedBlock simulate_block(const SimConfig& config, const ForwardModel& fm,
                              Rng& rng) {
    config.validate();
    if (static_cast<int>(config.alpha_true.size()) != fm.components())
        throw std::invalid_argument("simulate_block: alpha_true size != model components");

    BlockGrid grid = config.clear_mask.empty()
                         ? BlockGrid(config.rows, config.cols)
                         : BlockGrid(config.rows, config.cols, config.clear_mask);
    const Adjacency adj = build_adjacency(grid);
    const int P = grid.clear_count();
    const int C = fm.channels();

    int clip_count = 0;
    AerosolState truth;
    truth.components = fm.components();
    truth.tau = sample_gmrf(grid, adj, config.kappa_true, config.tau_center,
                            fm.tau_min(), fm.tau_max(), rng,
                            config.allow_disconnected, &clip_count);
    truth.theta = sample_theta_field(P, config.alpha_true, rng);

    std::vector<double> noiseless(static_cast<std::size_t>(P) * C);
    for (int p = 0; p < P; ++p)
        fm.eval(truth.tau[p], truth.theta_of(p),
                std::span<double>(noiseless.data() + static_cast<std::size_t>(p) * C,
                                  static_cast<std::size_t>(C)));

    std::vector<double> mean(C, 0.0);
    for (int p = 0; p < P; ++p)
        for (int c = 0; c < C; ++c)
            mean[c] += noiseless[static_cast<std::size_t>(p) * C + c];
    for (double& m : mean) m /= std::max(1, P);

    std::vector<double> noise_sd(C);
    for (int c = 0; c < C; ++c) noise_sd[c] = config.noise_fraction * mean[c];

    int floor_count = 0;
    std::vector<double> observed(noiseless);
    if (config.noise_fraction > 0.0) {
        for (int p = 0; p < P; ++p)
            for (int c = 0; c < C; ++c) {
                double& L = observed[static_cast<std::size_t>(p) * C + c];
                const double clean = L;
                bool ok = false;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    const double candidate = clean + rng.normal(0.0, noise_sd[c]);
                    if (candidate > 0.0) {
                        L = candidate;
                        ok = true;
                        break;
                    }
                }
                if (!ok) {
                    L = 1e-6;
                    ++floor_count;
                }
            }
    }

    SimulatedBlock out{RadianceBlock(std::move(grid), C, std::move(observed)),
                       std::move(truth),
                       config.kappa_true,
                       config.alpha_true,
                       std::move(noise_sd),
                       clip_count,
                       floor_count};
    return out;
}

} // namespace aodret
