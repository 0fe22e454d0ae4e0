#include "smm/cv_entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "smm/error.hpp"

namespace smm {

std::string ModePartition::label() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < group_a.size(); ++i) out << (i ? "," : "") << group_a[i];
    out << '|';
    for (std::size_t i = 0; i < group_b.size(); ++i) out << (i ? "," : "") << group_b[i];
    return out.str();
}

ModePartition parse_partition(const std::string& label) {
    const auto bar = label.find('|');
    if (bar == std::string::npos) throw Error("bad_partition", "expected 'A|B', got '" + label + "'");
    const auto parse = [&](const std::string& text) {
        std::vector<int> out;
        std::stringstream in(text);
        std::string item;
        while (std::getline(in, item, ',')) {
            try {
                out.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw Error("bad_partition", "bad mode index '" + item + "' in '" + label + "'");
            }
        }
        return out;
    };
    ModePartition p{parse(label.substr(0, bar)), parse(label.substr(bar + 1))};
    if (p.group_a.empty() || p.group_b.empty())
        throw Error("bad_partition", "both groups must be non-empty in '" + label + "'");
    return p;
}

Eigen::MatrixXd symplectic_form(int oscillators) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * oscillators, 2 * oscillators);
    for (int k = 0; k < oscillators; ++k) {
        omega(2 * k, 2 * k + 1) = 1.0;
        omega(2 * k + 1, 2 * k) = -1.0;
    }
    return omega;
}

SymplecticSpectrum symplectic_spectrum(const Eigen::MatrixXd& v) {
    if (v.rows() != v.cols() || v.rows() % 2 != 0 || v.rows() == 0)
        throw Error("bad_covariance", "covariance matrix must be square with even dimension");
    const double scale = v.cwiseAbs().maxCoeff();
    if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
        throw Error("bad_covariance", "covariance matrix is not symmetric");

    // i Omega V and Omega V share eigenvalue moduli; the real form is cheaper.
    const int n = static_cast<int>(v.rows()) / 2;
    const Eigen::MatrixXd ov = symplectic_form(n) * v;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(ov, false);
    if (solver.info() != Eigen::Success) throw Error("bad_covariance", "eigen decomposition failed");
    std::vector<double> moduli(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < 2 * n; ++i) moduli[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()[i]);
    std::sort(moduli.begin(), moduli.end());

    SymplecticSpectrum out;
    out.values.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        const double a = moduli[2 * k], b = moduli[2 * k + 1];
        out.values[k] = 0.5 * (a + b);
        const double mag = std::max(a, b);
        if (mag > 0.0) out.pairing_defect = std::max(out.pairing_defect, (b - a) / mag);
    }
    return out;
}

std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& v) { return symplectic_spectrum(v).values; }

Eigen::MatrixXd partial_transpose(const Eigen::MatrixXd& v, const ModePartition& partition) {
    const int modes = static_cast<int>(v.rows()) / 2;
    Eigen::VectorXd sign = Eigen::VectorXd::Ones(v.rows());
    for (int m : partition.group_b) {
        if (m < 1 || m > modes) throw Error("bad_partition", "mode index out of range in " + partition.label());
        sign(2 * (m - 1) + 1) = -1.0;
    }
    for (int m : partition.group_a)
        if (m < 1 || m > modes) throw Error("bad_partition", "mode index out of range in " + partition.label());
    return sign.asDiagonal() * v * sign.asDiagonal();
}

Eigen::MatrixXd restrict_to_modes(const Eigen::MatrixXd& v, const std::vector<int>& modes) {
    const int available = static_cast<int>(v.rows()) / 2;
    std::vector<Eigen::Index> rows;
    rows.reserve(2 * modes.size());
    for (int m : modes) {
        if (m < 1 || m > available) throw Error("bad_partition", "mode index out of range");
        rows.push_back(2 * (m - 1));
        rows.push_back(2 * (m - 1) + 1);
    }
    return v(rows, rows);
}

double log_negativity(const Eigen::MatrixXd& v, const ModePartition& partition) {
    std::vector<int> order = partition.group_a;
    order.insert(order.end(), partition.group_b.begin(), partition.group_b.end());
    const Eigen::MatrixXd restricted = restrict_to_modes(v, order);

    ModePartition local;
    const int a = static_cast<int>(partition.group_a.size());
    for (int i = 1; i <= a; ++i) local.group_a.push_back(i);
    for (int i = 1; i <= static_cast<int>(partition.group_b.size()); ++i) local.group_b.push_back(a + i);

    const auto nu = symplectic_eigenvalues(partial_transpose(restricted, local));
    return std::max(0.0, -std::log(2.0 * nu.front()));
}

std::vector<ModePartition> balanced_partitions(int mode_count) {
    if (mode_count < 2 || mode_count % 2 != 0)
        throw Error("unsupported", "balanced partitions need an even mode count >= 2");
    const int half = mode_count / 2;
    std::vector<ModePartition> out;
    // Choose the other half-1 members of group A from modes 2..M.
    std::vector<bool> pick(static_cast<std::size_t>(mode_count - 1), false);
    std::fill(pick.begin(), pick.begin() + (half - 1), true);
    do {
        ModePartition p;
        p.group_a.push_back(1);
        for (int i = 0; i < mode_count - 1; ++i) {
            (pick[static_cast<std::size_t>(i)] ? p.group_a : p.group_b).push_back(i + 2);
        }
        out.push_back(std::move(p));
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return out;
}

PartitionChoice best_balanced_partition(const Eigen::MatrixXd& v, int mode_count) {
    PartitionChoice best;
    bool first = true;
    for (auto& p : balanced_partitions(mode_count)) {
        const double e = log_negativity(v, p);
        if (first || e > best.value) {
            best = {std::move(p), e};
            first = false;
        }
    }
    return best;
}

bool physicality_check(const Eigen::MatrixXd& v, double tolerance) {
    return symplectic_eigenvalues(v).front() >= 0.5 - tolerance;
}

} // namespace smm
