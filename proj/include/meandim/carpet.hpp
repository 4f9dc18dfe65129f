#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meandim/bigint.hpp"
#include "meandim/caps.hpp"
#include "meandim/entropy.hpp"
#include "meandim/group.hpp"
#include "meandim/subshift.hpp"

namespace meandim {

struct CarpetSpec {
    std::string name;
    int a = 2;
    int b = 2;
    SubshiftSpec omega;  // paired alphabet a x b

    long double w() const;  // log b / log a
    void validate() const;
};

CarpetSpec make_carpet(int a, int b, SubshiftSpec omega);
CarpetSpec parse_carpet(const nlohmann::json& doc);
nlohmann::json carpet_to_json(const CarpetSpec& spec);

// largest k with a^k <= b^l, i.e. floor(w l) computed in integers
std::int64_t floor_wl(int a, int b, std::int64_t l);

long double mdim_M_carpet(long double h, long double h_prime, int a, int b);
long double mdim_H_carpet(long double hw, int b);

// Omega and Omega' restricted to ball(m), with the fixed section and tail pattern
class CarpetWindow {
public:
    CarpetWindow(const CarpetSpec& spec, std::int64_t m, const Caps& caps = {});

    const CarpetSpec& spec() const { return *spec_; }
    std::int64_t m() const { return m_; }
    const GroupWindow& window() const { return omega_.window; }
    std::size_t cells() const { return omega_.window.size(); }
    bool empty() const { return omega_.size() == 0; }
    const PatternSet& omega() const { return omega_; }
    const PatternSet& omega_prime() const { return prime_; }
    std::size_t omega_count() const { return omega_.size(); }
    std::size_t prime_count() const { return prime_.size(); }
    // A-part of pattern p at cell c, B-part likewise
    int u(std::size_t p, std::size_t c) const { return spec_->omega.alphabet.a_part(omega_.pattern(p)[c]); }
    int v(std::size_t p, std::size_t c) const { return spec_->omega.alphabet.b_part(omega_.pattern(p)[c]); }
    int prime_symbol(std::size_t q, std::size_t c) const { return prime_.pattern(q)[c]; }
    std::size_t projection(std::size_t p) const { return proj_[p]; }
    // lexicographically least u with (u, v) legal
    std::size_t section(std::size_t q) const { return section_[q]; }
    std::size_t fiber(std::size_t q) const { return fiber_[q]; }
    std::size_t tail() const { return 0; }
    // max minus min of the A-digit at cell c over the fiber of q
    int fiber_spread(std::size_t q, std::size_t c) const { return spread_[q * cells() + c]; }
    int a_spread(std::size_t c) const { return a_spread_[c]; }
    int b_spread(std::size_t c) const { return b_spread_[c]; }

private:
    const CarpetSpec* spec_;
    std::int64_t m_;
    PatternSet omega_;
    PatternSet prime_;
    std::vector<std::size_t> proj_, section_, fiber_;
    std::vector<int> spread_, a_spread_, b_spread_;
};

// exact integer coordinates: X = Xn / (a^l (a-1)), Y = Yn / (b^l (b-1)), per cell
struct Representatives {
    std::int64_t l = 0;
    std::int64_t k = 0;  // floor(w l)
    std::size_t cells = 0;
    std::int64_t x_den = 1;
    std::int64_t y_den = 1;
    std::vector<std::int64_t> x;  // point-major
    std::vector<std::int64_t> y;
    std::size_t size() const { return cells == 0 ? 0 : x.size() / cells; }
};

BigInt representative_count(const CarpetWindow& cw, std::int64_t l);
Representatives carpet_representatives(const CarpetWindow& cw, std::int64_t l, const Caps& caps = {});

// pairs with |dX| < tx and |dY| < ty in every cell
struct ClosePair {
    std::size_t i = 0;
    std::size_t j = 0;
};
std::optional<ClosePair> find_close_pair(const Representatives& r, std::int64_t tx, std::int64_t ty);

struct SandwichReport {
    std::int64_t m = 0;
    std::int64_t l = 0;
    std::int64_t k = 0;
    std::size_t omega_count = 0;
    std::size_t prime_count = 0;
    BigInt product = 0;
    BigInt separated = 0;   // verified b^{-l}-separated representatives
    BigInt cover = 0;       // Phi cells
    BigInt max_cell_num = 0;  // largest cell diameter is max_cell_num / cell_den
    BigInt cell_den = 1;
    double max_cell_diameter = 0;
    double cover_scale = 0;  // a b^{-l}
    bool lower_ok = false;
    bool upper_ok = false;
};

nlohmann::json to_json(const SandwichReport& r);
SandwichReport sandwich_check(const CarpetWindow& cw, std::int64_t l, const Caps& caps = {});

struct PsiCell {
    std::int64_t m = 0;
    std::int64_t l = 0;
    std::vector<std::size_t> full;   // Omega indices, n = 1..floor(wl)
    std::vector<std::size_t> prime;  // Omega' indices, n = floor(wl)+1..l

    std::size_t prime_at(const CarpetWindow& cw, std::size_t n) const;  // Omega' index of y_{n+1}
    bool operator==(const PsiCell&) const = default;
};

class IllegalPrefix : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

BigInt psi_cell_count(const CarpetWindow& cw, std::int64_t l);
// mixed-radix decoding in canonical order
PsiCell psi_cell(const CarpetWindow& cw, std::int64_t l, const BigInt& ordinal);
// from raw digit patterns; throws IllegalPrefix
PsiCell psi_cell_from_patterns(const CarpetWindow& cw, std::int64_t l,
                               const std::vector<std::vector<Symbol>>& x_prefix,
                               const std::vector<std::vector<Symbol>>& y_prefix);

class CarpetMeasure {
public:
    CarpetMeasure(const CarpetWindow& cw, long double w);

    const CarpetWindow& window() const { return *cw_; }
    long double w() const { return w_; }
    long double log_z() const { return log_z_; }
    long double log_t(std::size_t q) const { return log_t_[q]; }
    // f(u,v) = t(v)^{w-1} / Z and f'(v) = t(v)^w / Z
    long double log_f(std::size_t p) const { return (w_ - 1) * log_t_[cw_->projection(p)] - log_z_; }
    long double log_f_prime(std::size_t q) const { return w_ * log_t_[q] - log_z_; }
    long double sum_f() const;
    long double sum_f_prime() const;
    // Omega' index for u in [0,1)
    std::size_t sample_prime(double u) const;

private:
    const CarpetWindow* cw_;
    long double w_;
    long double log_z_ = 0;
    std::vector<long double> log_t_;
    std::vector<double> cdf_;
};

long double mu_psi(const CarpetMeasure& mu, const PsiCell& cell);

struct ProbeReport {
    std::int64_t l = 0;
    std::size_t samples = 0;
    long double log_z = 0;  // per site
    long double mean_neg_log = 0;  // mean of -(1/(l|B|)) log mu
    long double mean_deviation = 0;
    long double q05 = 0, q50 = 0, q95 = 0;
    long double within_delta = 0;  // fraction with |deviation| <= delta
    long double delta = 0;
};

nlohmann::json to_json(const ProbeReport& r);
ProbeReport shannon_mcmillan_probe(const CarpetMeasure& mu, std::int64_t l, std::size_t samples, std::uint64_t seed,
                                   long double delta = 0.05L);

struct PigeonholeResult {
    bool found = false;
    std::size_t i = 0;
    std::size_t j = 0;
};

// boxes corner + [0, a^{-k}]^B x [0, b^{-l}]^B; a pair at distance >= b^{-l}
PigeonholeResult separation_pigeonhole_check(const CarpetWindow& cw, std::int64_t l, const std::vector<PsiCell>& cells);

struct CarpetDimensions {
    long double w = 0;
    EntropySeries omega;
    WeightedEntropySeries weighted;  // rows carry log |Omega|, log |Omega'|, log Z
    long double h = 0, h_prime = 0, hw = 0;
    std::string h_source;
    long double mdim_M = 0, mdim_H = 0;
    std::vector<long double> mdim_M_rows, mdim_H_rows;
};

nlohmann::json to_json(const CarpetDimensions& d);
CarpetDimensions carpet_dimensions(const CarpetSpec& spec, const FolnerDescriptor& folner, const Caps& caps = {});

namespace reference {
Representatives carpet_representatives(const CarpetWindow& cw, std::int64_t l, const Caps& caps = {});
std::optional<ClosePair> find_close_pair(const Representatives& r, std::int64_t tx, std::int64_t ty);
PigeonholeResult separation_pigeonhole_check(const CarpetWindow& cw, std::int64_t l, const std::vector<PsiCell>& cells);
ProbeReport shannon_mcmillan_probe(const CarpetMeasure& mu, std::int64_t l, std::size_t samples, std::uint64_t seed,
                                   long double delta = 0.05L);
}  // namespace reference

}  // namespace meandim
