#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smm {

// Mode indices are 1-based and refer to the first 2M rows of a covariance
// matrix laid out as (x_1, y_1, ..., x_M, y_M, ...).
struct ModePartition {
    std::vector<int> group_a;
    std::vector<int> group_b;

    std::string label() const;  // "1,2,3|4,5,6"
    friend bool operator==(const ModePartition&, const ModePartition&) = default;
};

ModePartition parse_partition(const std::string& label);

// Block-diagonal sum of [[0, 1], [-1, 0]] over `oscillators` pairs.
Eigen::MatrixXd symplectic_form(int oscillators);

struct SymplecticSpectrum {
    std::vector<double> values;   // one per +- pair, ascending
    double pairing_defect = 0.0;  // largest relative mismatch within a pair
};

// Moduli of the eigenvalues of i Omega V, paired. Throws smm::Error
// ("bad_covariance") for odd or non-symmetric input.
SymplecticSpectrum symplectic_spectrum(const Eigen::MatrixXd& v);
std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& v);

// P V P with P = -1 on the y quadratures of group B.
Eigen::MatrixXd partial_transpose(const Eigen::MatrixXd& v, const ModePartition& partition);

// Rows/columns of the listed modes, in the given order.
Eigen::MatrixXd restrict_to_modes(const Eigen::MatrixXd& v, const std::vector<int>& modes);

// max(0, -ln 2 nu_min) of the restricted, partially transposed matrix.
double log_negativity(const Eigen::MatrixXd& v, const ModePartition& partition);

// All C(M, M/2)/2 balanced splits, group A containing mode 1, in
// lexicographic order of group A.
std::vector<ModePartition> balanced_partitions(int mode_count);

struct PartitionChoice {
    ModePartition partition;
    double value = 0.0;
};

// Argmax of log_negativity over balanced_partitions; ties go to the earliest
// (lexicographically smallest) group A.
PartitionChoice best_balanced_partition(const Eigen::MatrixXd& v, int mode_count);

// min symplectic eigenvalue >= 1/2 - tolerance.
bool physicality_check(const Eigen::MatrixXd& v, double tolerance = 1e-9);

} // namespace smm
