#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cihj/family.hpp"
#include "cihj/functional.hpp"
#include "cihj/penalty.hpp"

namespace cihj {

/// Penalty weights for one doubling pass plus the shrinking schedule.
struct DoublingConfig {
    double epsilon = 1.0;
    double delta = 1.0;
    double alpha = 0.0;
    std::vector<std::pair<double, double>> schedule; ///< (epsilon, delta), strictly decreasing

    void validate() const;
};

/// Index of a (path, future node) point of an enumerated family.
struct FamilyPoint {
    int path = 0;
    int node = 0;
    bool operator==(const FamilyPoint& o) const { return path == o.path && node == o.node; }
};

/// Exact argmax of Phi_eps^delta over the product of family points.
struct Maximizer {
    FamilyPoint left;
    FamilyPoint right;
    double value = 0.0;
    std::int64_t ties = 0; ///< co-maximizers (exact double equality)
};

/// Phi_eps^delta(t,x,tau,y) = phi1(t,x) - phi2(tau,y) - alpha(2T-t-tau)
///                            - (t-tau)^2/delta - V^L(t,x,tau,y)/eps.
double phi_eps_delta(const Functional& phi1, const Functional& phi2, const DoublingConfig& cfg,
                     double L, int t_idx, const GridPath& x, int tau_idx, const GridPath& y);

/// Exhaustive argmax over (node x path)^2 with lexicographic tie-break
/// (left point first, then right point; points ordered path-major). The
/// penalty is instantiated with the family slope bound. The result is
/// independent of the thread count. Throws CapError when the quadruple
/// sweep exceeds work_cap.
Maximizer maximize_phi(const Functional& phi1, const Functional& phi2, const EnumeratedFamily& fam,
                       const DoublingConfig& cfg, int threads = 1,
                       std::uint64_t work_cap = 1'000'000'000);

/// Validates that a schedule is non-empty, positive and strictly
/// decreasing in both coordinates.
void validate_schedule(const std::vector<std::pair<double, double>>& schedule);

struct NamedMargin {
    std::string name;
    double value = 0.0;
    bool pass = false;
};

/// Step-2 estimate margins at a maximizer, plus the Step-3 quantities.
/// These are theorems for any stopping-closed finite family (interiority
/// additionally needs the terminal boundary condition), so a negative
/// margin indicates an implementation failure or a boundary-violating
/// input.
struct EstimateLedger {
    bool short_circuit = false; ///< b <= 0: comparison already holds
    double b = 0.0;
    double c = 0.0;
    double alpha = 0.0;
    double eps_star = 0.0;
    std::vector<NamedMargin> margins;
    bool interiority_required = false;
    bool interior_left = false;
    bool interior_right = false;
    bool pass() const;
};

/// Derivative ledger of the Step-4 test functionals at the maximizer.
struct TestFunctionalLedger {
    double dpsi1_dt = 0.0;
    double dpsi2_dtau = 0.0;
    double ident_deviation = 0.0;       ///< |(dpsi1 - dpsi2) + 2 alpha|
    double ident_tol = 0.0;             ///< 4-ulp scale for the identity
    double grad_gap = 0.0;              ///< ||grad psi1 - grad psi2||, exactly 0
    double gradient_bound_margin = 0.0; ///< 8||x(t)-y(tau)||/eps - ||grad psi1||
    double touching_left_margin = 0.0;  ///< min over sweep of Phi(m) - Phi(l, r*)
    double touching_right_margin = 0.0; ///< min over sweep of Phi(m) - Phi(l*, r)
    std::vector<double> grad_psi1;
    bool pass() const;
};

/// The Step-4 test functionals psi1, psi2 built from penalty slices at a
/// maximizer, with exact ci-derivative fields, plus their ledger. The
/// touching margins are computed through the shared Phi arithmetic, so
/// they are exact zeros or positive.
struct TestFunctionalPair {
    Functional psi1;
    Functional psi2;
    TestFunctionalLedger ledger;
};

/// Shared precomputation for one (phi1, phi2, family) triple: point
/// values, b, c, discrete moduli of continuity, eps_star.
class DoublingEngine {
public:
    DoublingEngine(Functional phi1, Functional phi2, const EnumeratedFamily& fam, int threads = 1,
                   std::uint64_t work_cap = 1'000'000'000);

    double b() const { return b_; }
    double c() const { return c_; }
    double alpha() const { return alpha_; }
    double eps_star() const { return eps_star_; }
    double slope_bound() const { return fam_.def.slope_bound; }

    /// Discrete modulus of continuity of phi_i (i in {1,2}) by sweep.
    double modulus(int which, double theta) const;

    /// Terminal-boundary gap max over paths of phi1(T,x) - phi2(T,x).
    double boundary_gap() const;

    /// Argmax with an explicit alpha; the proof pipeline passes alpha().
    Maximizer maximize(double eps, double delta, double alpha) const;

    EstimateLedger estimates(double eps, double delta, const Maximizer& m) const;

    TestFunctionalPair test_functionals(double eps, double delta, const Maximizer& m) const;

    double phi_quadruple(double eps, double delta, double alpha, int lp, int ln, int rp,
                         int rn) const;

    const EnumeratedFamily& family() const { return fam_; }
    const Functional& phi1() const { return phi1_; }
    const Functional& phi2() const { return phi2_; }

private:
    struct ModulusTable {
        std::vector<double> dist;     // sorted pair distances
        std::vector<double> prefix;   // prefix max of |phi diff|
        double query(double theta) const;
    };

    Functional phi1_;
    Functional phi2_;
    const EnumeratedFamily& fam_;
    int threads_;
    int n_nodes_; // future nodes per path
    std::vector<double> phi1_pts_;
    std::vector<double> phi2_pts_;
    double b_ = 0.0;
    double c_ = 0.0;
    double alpha_ = 0.0;
    double eps_star_ = 0.0;
    ModulusTable mod1_;
    ModulusTable mod2_;

    int point_index(int path, int node) const;
    void build_moduli(std::uint64_t work_cap);
    void compute_eps_star();
};

enum class Verdict { comparison_holds, contradiction_detected, inconclusive };

std::string to_string(Verdict v);

/// One schedule point of the comparison pipeline.
struct ScheduleEntry {
    double eps = 0.0;
    double delta = 0.0;
    Maximizer max;
    EstimateLedger estimates;
    bool ledger_present = false;
    TestFunctionalLedger ledger;
    bool hamiltonian_present = false;
    double hamiltonian_gap = 0.0;
    bool gap_ge_2alpha = false;
};

/// Full output of a comparison run: b, the per-schedule estimate chain,
/// the Hamiltonian gaps, and the verdict. Grid verdicts are diagnostic:
/// Step-2/3/4 estimates re-derive verbatim for finite stopping-closed
/// families, but the continuum Step-5 argument does not, so a detected
/// contradiction certifies grid-scale inconsistency only.
struct DoublingReport {
    double b = 0.0;
    double c = 0.0;
    double alpha = 0.0;
    double eps_star = 0.0;
    double boundary_gap = 0.0;
    Maximizer maximizer; ///< maximizer at the final schedule point
    std::vector<ScheduleEntry> entries;
    Verdict verdict = Verdict::inconclusive;
    int attached_entry = -1; ///< schedule index of a lone gap occurrence
    std::string interpretation;

    bool all_margins_pass() const;
};

enum class TouchSide { sub, super };

/// Lemma-5.1-style bound at a touching point: for the sub side asserts
/// dt(psi) + <grad psi, v> >= -L_phi for all probes, for the super side
/// <= L_phi, using psi's exact ci-derivatives. Throws when psi has no
/// exact ci at p or the touching precondition fails.
struct LemmaBoundCheck {
    double l_phi = 0.0;
    double margin = 0.0; ///< min over probes of the asserted slack
    double touching_gap = 0.0;
    bool pass() const { return margin >= 0.0; }
};
LemmaBoundCheck lemma_bounds(const Functional& phi, const Functional& psi,
                             const EnumeratedFamily& fam, FamilyPoint p, TouchSide side,
                             std::span<const std::vector<double>> probes,
                             std::uint64_t work_cap = 100'000'000);

/// End-to-end comparison pipeline. Verifies the terminal boundary
/// condition (throws BoundaryError otherwise), short-circuits to
/// comparison-holds when b <= 0, and otherwise runs every schedule point:
/// maximizer, Step-2 margins, Step-3 interiority below eps_star, Step-4
/// ledger, and the Hamiltonian gap H(t,x,grad psi1) - H(tau,y,grad psi1).
/// Verdict is contradiction-detected when the gap >= 2 alpha at every
/// schedule point with eps <= eps_star (and at least one such point
/// exists); a non-persistent occurrence yields inconclusive with the
/// entry attached.
DoublingReport comparison_verdict(
    const Functional& phi1, const Functional& phi2, const EnumeratedFamily& fam,
    const std::function<double(int, const GridPath&, std::span<const double>)>& hamiltonian,
    const std::vector<std::pair<double, double>>& schedule, int threads = 1,
    std::uint64_t work_cap = 1'000'000'000);

} // namespace cihj
