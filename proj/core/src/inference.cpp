#include "pathagg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pathagg/error.hpp"

namespace pathagg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double scaled_factor(double scale, double ref) {
  return scale == kNegInf ? 0.0 : std::exp(scale - ref);
}

// Mantissa sums are kept within 2^-k .. 2^k.
constexpr int kRescaleExponent = 500;
// Slices whose backward base weight is this far below the largest keep
// their own scale.
constexpr double kSpread = 600.0 * std::numbers::ln2;
constexpr std::size_t kMaxCounted = 64;
// Scale gap between slices combined in one step beyond which a pass is
// redone per cell in log space.
constexpr double kMaxGap = 200.0;
// Allowed deviation of the posterior occupancy of a position from one.
constexpr double kOccupancyTolerance = 1e-10;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }
// Largest |log| of a combined scale factor applied directly; beyond it the
// factor is folded into the mantissas in log space.
constexpr double kSafeExponent = 600.0;

// Consecutive identical arguments are common because slices usually share
// a scale.
struct ExpCache {
  double arg = std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  double operator()(double a) {
    if (a != arg) {
      arg = a;
      value = std::exp(a);
    }
    return value;
  }
};

}  // namespace

// Dense DP over (position, visit index, state). Mantissas of each
// (position, visit index) slice are renormalized to sum to one and the
// removed mass is kept as that slice's log scale, so slices whose
// magnitudes differ by far more than the double range stay exact relative
// to each other.
class LatticeEngine {
 public:
  LatticeEngine(const HmmParams& params, const VisitCaps& caps)
      : topology_(params.topology()), caps_(caps) {
    s_ = topology_.state_count();
    a_ = params.alphabet().size();
    v_ = caps.lattice_size();
    if (caps.dimension() != 0 && caps.dimension() != topology_.counted_count()) {
      throw InvalidInput("caps dimension " + std::to_string(caps.dimension()) + " does not match " +
                         std::to_string(topology_.counted_count()) + " counted states");
    }
    if (caps.overflowed()) throw CapacityError("visit lattice too large to enumerate");
    n_ = caps.dimension();

    slot_.assign(s_, -1);
    if (n_ > 0) {
      for (std::size_t s = 0; s < s_; ++s)
        slot_[s] = topology_.counted_slot(static_cast<StateIndex>(s));
    }
    start_ = params.start();
    emission_.resize(s_ * a_);
    for (std::size_t s = 0; s < s_; ++s) {
      for (std::size_t x = 0; x < a_; ++x) emission_[x * s_ + s] = params.emission()[s][x];
    }
    log_emission_.resize(emission_.size());
    std::transform(emission_.begin(), emission_.end(), log_emission_.begin(), safe_log);

    // Outgoing CSR.
    out_offset_.push_back(0);
    for (std::size_t s = 0; s < s_; ++s) {
      const auto& succ = topology_.successors(static_cast<StateIndex>(s));
      for (std::size_t j = 0; j < succ.size(); ++j) {
        out_to_.push_back(succ[j]);
        out_prob_.push_back(params.transition()[s][j]);
      }
      out_offset_.push_back(out_to_.size());
    }
    // Incoming CSR.
    std::vector<std::vector<std::pair<int, double>>> incoming(s_);
    for (std::size_t s = 0; s < s_; ++s) {
      for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
        incoming[static_cast<std::size_t>(out_to_[e])].emplace_back(static_cast<int>(s),
                                                                    out_prob_[e]);
      }
    }
    in_offset_.push_back(0);
    for (const auto& list : incoming) {
      for (const auto& [from, p] : list) {
        in_from_.push_back(from);
        in_prob_.push_back(p);
      }
      in_offset_.push_back(in_from_.size());
    }
    out_logp_.resize(out_prob_.size());
    std::transform(out_prob_.begin(), out_prob_.end(), out_logp_.begin(), safe_log);
    in_logp_.resize(in_prob_.size());
    std::transform(in_prob_.begin(), in_prob_.end(), in_logp_.begin(), safe_log);

    if (n_ > kMaxCounted) {
      throw CapacityError("at most " + std::to_string(kMaxCounted) + " counted states supported");
    }
    for (std::size_t k = 0; k < n_; ++k) {
      strides_.push_back(caps.stride(k));
      caps_vec_.push_back(caps.cap(k));
    }
    comp_.resize(v_ * n_);
    inc_.resize(v_ * n_);
    for (std::size_t v = 0; v < v_; ++v) {
      for (std::size_t k = 0; k < n_; ++k) {
        comp_[v * n_ + k] = caps.component(v, k);
        inc_[v * n_ + k] = caps.increment(v, k);
      }
    }
  }

  std::size_t states() const { return s_; }
  std::size_t visits() const { return v_; }

  void check(std::span<const Symbol> x) const {
    if (x.empty()) throw InvalidInput("empty input sequence");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] >= a_) {
        throw InvalidInput("symbol index " + std::to_string(x[i]) + " at position " +
                           std::to_string(i) + " is outside the alphabet");
      }
    }
  }

  // Fills mant[L * V * S] and scale[L * V].
  void forward(std::span<const Symbol> x, std::vector<double>& mant,
               std::vector<double>& scale) const {
    std::vector<double> mass(v_);
    const std::size_t len = x.size();
    mant.resize(len * v_ * s_);
    scale.resize(len * v_);

    double* first = mant.data();
    std::fill(first, first + v_ * s_, 0.0);
    const double* e0 = &emission_[x[0] * s_];
    for (std::size_t s = 0; s < s_; ++s) {
      if (start_[s] <= 0.0) continue;
      std::size_t v = slot_[s] >= 0 ? index_after_start(slot_[s]) : 0;
      first[v * s_ + s] = start_[s] * e0[s];
    }
    for (std::size_t v = 0; v < v_; ++v) {
      double sum = 0.0;
      for (std::size_t s = 0; s < s_; ++s) sum += first[v * s_ + s];
      settle(first + v * s_, sum, 0.0, scale[v]);
    }

    for (std::size_t i = 1; i < len; ++i) {
      const double* prev = mant.data() + (i - 1) * v_ * s_;
      const double* prev_scale = scale.data() + (i - 1) * v_;
      double* cur = mant.data() + i * v_ * s_;
      double* cur_scale = scale.data() + i * v_;
      const double* e = &emission_[x[i] * s_];
      log_masses(prev, prev_scale, mass);
      for (std::size_t w = 0; w < v_; ++w) {
        double* out = cur + w * s_;
        // Reference from the source masses: a scale alone can sit far
        // above the mass it carries.
        double ref = mass[w];
        for (std::size_t k = 0; k < n_; ++k) {
          if (comp_[w * n_ + k] > 0) ref = std::max(ref, mass[w - strides_[k]]);
        }
        if (ref == kNegInf) {
          std::fill(out, out + s_, 0.0);
          cur_scale[w] = kNegInf;
          continue;
        }
        const double f_self = factor(prev_scale[w], ref);
        double sum = 0.0;
        for (std::size_t t = 0; t < s_; ++t) {
          double val = 0.0;
          if (e[t] != 0.0) {
            const int k = slot_[t];
            if (k < 0) {
              if (f_self > 0.0) val = f_self * incoming_sum(prev + w * s_, t);
            } else {
              const auto ku = static_cast<std::size_t>(k);
              const int c = comp_[w * n_ + ku];
              if (c > 0) {
                const std::size_t src = w - strides_[ku];
                const double f = factor(prev_scale[src], ref);
                if (f > 0.0) val += f * incoming_sum(prev + src * s_, t);
              }
              if (c == caps_vec_[ku] && f_self > 0.0) {
                val += f_self * incoming_sum(prev + w * s_, t);
              }
            }
            val *= e[t];
          }
          out[t] = val;
          sum += val;
        }
        settle(out, sum, ref, cur_scale[w]);
      }
    }
  }

  // log p(y | v) per visit index, or zeros when unconditioned.
  std::vector<double> base_case(const std::optional<Response>& response) const {
    std::vector<double> base(v_, 0.0);
    if (!response) return base;
    if (response->regression.dimension() != n_) {
      throw InvalidInput("regression dimension does not match the counted states");
    }
    response->regression.validate();
    for (std::size_t v = 0; v < v_; ++v) {
      VisitVector visits(comp_.begin() + static_cast<std::ptrdiff_t>(v * n_),
                         comp_.begin() + static_cast<std::ptrdiff_t>((v + 1) * n_));
      base[v] = log_predict_density(response->regression, visits, response->y);
    }
    return base;
  }

  // Base case exp(base[v]) for every state. Slices share one scale unless
  // their weight would leave the mantissa range. Returns true when the
  // weights spread too far for the scaled passes.
  bool backward_init(const std::vector<double>& base, double* mant, double* scale) const {
    const double top = *std::max_element(base.begin(), base.end());
    bool lossy = false;
    for (std::size_t v = 0; v < v_; ++v) {
      double m = 1.0;
      scale[v] = base[v];
      if (base[v] - top > -kSpread) {
        m = std::exp(base[v] - top);
        scale[v] = top;
      }
      lossy = lossy || gap(base[v], top);
      std::fill(mant + v * s_, mant + (v + 1) * s_, m);
    }
    return lossy;
  }

  // eb[d * S + t] = e(t, x) * next_mant[d][t]. peak[d * (N + 1) + j]
  // approximates the log of the largest eb entry of slice d among states in
  // group j (uncounted for j = 0, counted slot j - 1 otherwise).
  void emission_times(Symbol x, const double* next, const double* next_scale,
                      std::vector<double>& eb, std::vector<double>& peak) const {
    const double* e = &emission_[x * s_];
    const std::size_t g = n_ + 1;
    eb.resize(v_ * s_);
    peak.assign(v_ * g, 0.0);
    for (std::size_t d = 0; d < v_; ++d) {
      double* top = peak.data() + d * g;
      for (std::size_t t = 0; t < s_; ++t) {
        const double val = e[t] * next[d * s_ + t];
        eb[d * s_ + t] = val;
        const auto j = static_cast<std::size_t>(slot_[t] + 1);
        top[j] = std::max(top[j], val);
      }
      for (std::size_t j = 0; j < g; ++j) top[j] = log_magnitude(top[j], next_scale[d]);
    }
  }

  // beta_i from beta_{i+1}, given eb for x_{i+1}.
  bool backward_step(const std::vector<double>& eb, const std::vector<double>& peak,
                     const double* next_scale, double* cur, double* cur_scale) const {
    bool lossy = false;
    double fac[kMaxCounted + 1];
    std::size_t dest[kMaxCounted + 1];
    for (std::size_t v = 0; v < v_; ++v) {
      destinations(v, dest);
      double ref = kNegInf;
      for (std::size_t j = 0; j <= n_; ++j) ref = std::max(ref, peak[dest[j] * (n_ + 1) + j]);
      double* out = cur + v * s_;
      if (ref == kNegInf) {
        std::fill(out, out + s_, 0.0);
        cur_scale[v] = kNegInf;
        continue;
      }
      for (std::size_t j = 0; j <= n_; ++j) {
        const double top = peak[dest[j] * (n_ + 1) + j];
        fac[j] = top == kNegInf ? 0.0 : factor(next_scale[dest[j]], ref);
        lossy = lossy || gap(top, ref);
      }
      double sum = 0.0;
      for (std::size_t s = 0; s < s_; ++s) {
        double val = 0.0;
        for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
          const auto t = static_cast<std::size_t>(out_to_[e]);
          const std::size_t j = static_cast<std::size_t>(slot_[t] + 1);
          val += out_prob_[e] * fac[j] * eb[dest[j] * s_ + t];
        }
        out[s] = val;
        sum += val;
      }
      settle(out, sum, ref, cur_scale[v]);
    }
    return lossy;
  }

  // beta_i from beta_{i+1} as in backward_step, while adding the expected
  // transition counts of positions (i, i+1) to `xi` and the occupancy of
  // position i (their row sums) to `gamma`.
  void backward_step_with_counts(const std::vector<double>& eb, const std::vector<double>& peak,
                                 const double* next_scale, const double* fwd,
                                 const double* fwd_scale, double log_z, double* cur,
                                 double* cur_scale, std::vector<double>& xi,
                                 std::vector<double>& gamma) const {
    double fac[kMaxCounted + 1];
    std::size_t dest[kMaxCounted + 1];
    ExpCache cache;
    for (std::size_t v = 0; v < v_; ++v) {
      destinations(v, dest);
      double ref = kNegInf;
      for (std::size_t j = 0; j <= n_; ++j) ref = std::max(ref, peak[dest[j] * (n_ + 1) + j]);
      double* out = cur + v * s_;
      if (ref == kNegInf) {
        std::fill(out, out + s_, 0.0);
        cur_scale[v] = kNegInf;
        continue;
      }
      for (std::size_t j = 0; j <= n_; ++j) {
        const double top = peak[dest[j] * (n_ + 1) + j];
        fac[j] = top == kNegInf ? 0.0 : factor(next_scale[dest[j]], ref);
      }
      const double* alpha = fwd + v * s_;
      double sum = 0.0;
      const double a = fwd_scale[v] == kNegInf ? kNegInf : fwd_scale[v] + ref - log_z;
      if (a < -kSafeExponent || a > kSafeExponent) {
        // exp(a) alone may overflow or vanish while its products with the
        // mantissas are ordinary probabilities.
        for (std::size_t s = 0; s < s_; ++s) {
          double val = 0.0;
          const double la = alpha[s] > 0.0 && a != kNegInf ? a + std::log(alpha[s]) : kNegInf;
          for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
            const auto t = static_cast<std::size_t>(out_to_[e]);
            const std::size_t j = static_cast<std::size_t>(slot_[t] + 1);
            const double term = out_prob_[e] * fac[j] * eb[dest[j] * s_ + t];
            if (la != kNegInf && term > 0.0) xi[e] += std::exp(la + std::log(term));
            val += term;
          }
          if (la != kNegInf && val > 0.0) gamma[s] += std::exp(la + std::log(val));
          out[s] = val;
          sum += val;
        }
        settle(out, sum, ref, cur_scale[v]);
        continue;
      }
      const double g = a == kNegInf ? 0.0 : cache(a);
      for (std::size_t s = 0; s < s_; ++s) {
        double val = 0.0;
        const double w = g * alpha[s];
        if (w > 0.0) {
          for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
            const auto t = static_cast<std::size_t>(out_to_[e]);
            const std::size_t j = static_cast<std::size_t>(slot_[t] + 1);
            const double term = out_prob_[e] * fac[j] * eb[dest[j] * s_ + t];
            xi[e] += w * term;
            val += term;
          }
          gamma[s] += w * val;
        } else {
          for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
            const auto t = static_cast<std::size_t>(out_to_[e]);
            const std::size_t j = static_cast<std::size_t>(slot_[t] + 1);
            val += out_prob_[e] * fac[j] * eb[dest[j] * s_ + t];
          }
        }
        out[s] = val;
        sum += val;
      }
      settle(out, sum, ref, cur_scale[v]);
    }
  }

  // Adds posterior state occupancy at one position to `gamma`.
  void accumulate_occupancy(const double* fwd, const double* fwd_scale, const double* bwd,
                            const double* bwd_scale, double log_z,
                            std::vector<double>& gamma) const {
    ExpCache cache;
    for (std::size_t v = 0; v < v_; ++v) {
      if (fwd_scale[v] == kNegInf || bwd_scale[v] == kNegInf) continue;
      const double a = fwd_scale[v] + bwd_scale[v] - log_z;
      const double* f = fwd + v * s_;
      const double* b = bwd + v * s_;
      if (a < -kSafeExponent || a > kSafeExponent) {
        for (std::size_t s = 0; s < s_; ++s) {
          if (f[s] > 0.0 && b[s] > 0.0) gamma[s] += std::exp(a + std::log(f[s]) + std::log(b[s]));
        }
        continue;
      }
      const double g = cache(a);
      for (std::size_t s = 0; s < s_; ++s) gamma[s] += g * f[s] * b[s];
    }
  }

  // log of the total mass of each slice at one position.
  std::vector<double> slice_log_mass(const double* mant, const double* scale) const {
    std::vector<double> out(v_, kNegInf);
    for (std::size_t v = 0; v < v_; ++v) {
      if (scale[v] == kNegInf) continue;
      double sum = 0.0;
      for (std::size_t s = 0; s < s_; ++s) sum += mant[v * s_ + s];
      if (sum > 0.0) out[v] = scale[v] + std::log(sum);
    }
    return out;
  }

  // True when sum_{s,v} alpha beta matches the evidence at every position.
  bool occupancy_is_complete(const VisitLattice& lattice, const std::vector<double>& base) const {
    std::vector<double> joint = final_log_joint(*this, lattice);
    for (std::size_t v = 0; v < v_; ++v) joint[v] += base[v];
    const double log_z = log_sum_exp(joint);
    if (log_z == kNegInf) return true;
    const std::size_t vs = v_ * s_;
    std::vector<double> gamma(s_);
    for (std::size_t i = 0; i < lattice.length_; ++i) {
      std::fill(gamma.begin(), gamma.end(), 0.0);
      accumulate_occupancy(lattice.fwd_.data() + i * vs, lattice.fwd_scale_.data() + i * v_,
                           lattice.bwd_.data() + i * vs, lattice.bwd_scale_.data() + i * v_, log_z,
                           gamma);
      double total = 0.0;
      for (double g : gamma) total += g;
      if (!(std::abs(total - 1.0) <= kOccupancyTolerance)) return false;
    }
    return true;
  }

  // Per-cell log-space passes, used when the scaled passes lose mass.
  void log_forward_table(std::span<const Symbol> x, std::vector<double>& out) const {
    const std::size_t len = x.size();
    const std::size_t vs = v_ * s_;
    out.assign(len * vs, kNegInf);
    const double* le0 = &log_emission_[x[0] * s_];
    for (std::size_t s = 0; s < s_; ++s) {
      if (start_[s] <= 0.0) continue;
      const std::size_t v = slot_[s] >= 0 ? index_after_start(slot_[s]) : 0;
      out[v * s_ + s] = std::log(start_[s]) + le0[s];
    }
    for (std::size_t i = 1; i < len; ++i) {
      const double* prev = out.data() + (i - 1) * vs;
      double* cur = out.data() + i * vs;
      const double* le = &log_emission_[x[i] * s_];
      for (std::size_t w = 0; w < v_; ++w) {
        for (std::size_t t = 0; t < s_; ++t) {
          if (le[t] == kNegInf) continue;
          double val = kNegInf;
          const int k = slot_[t];
          if (k < 0) {
            val = incoming_log_sum(prev + w * s_, t);
          } else {
            const auto ku = static_cast<std::size_t>(k);
            const int c = comp_[w * n_ + ku];
            if (c > 0) val = incoming_log_sum(prev + (w - strides_[ku]) * s_, t);
            if (c == caps_vec_[ku]) val = log_add(val, incoming_log_sum(prev + w * s_, t));
          }
          cur[w * s_ + t] = val == kNegInf ? kNegInf : val + le[t];
        }
      }
    }
  }

  void log_backward_table(std::span<const Symbol> x, const std::vector<double>& base,
                          std::vector<double>& out) const {
    const std::size_t len = x.size();
    const std::size_t vs = v_ * s_;
    out.assign(len * vs, kNegInf);
    for (std::size_t v = 0; v < v_; ++v) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((len - 1) * vs + v * s_), s_, base[v]);
    }
    std::size_t dest[kMaxCounted + 1];
    for (std::size_t i = len - 1; i-- > 0;) {
      const double* next = out.data() + (i + 1) * vs;
      double* cur = out.data() + i * vs;
      const double* le = &log_emission_[x[i + 1] * s_];
      for (std::size_t v = 0; v < v_; ++v) {
        destinations(v, dest);
        for (std::size_t s = 0; s < s_; ++s) {
          double m = kNegInf;
          for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
            m = std::max(m, edge_log_term(e, le, next, dest));
          }
          if (m == kNegInf) continue;
          double sum = 0.0;
          for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
            sum += std::exp(edge_log_term(e, le, next, dest) - m);
          }
          cur[v * s_ + s] = m + std::log(sum);
        }
      }
    }
  }

  // Expected counts of one example from log tables; gamma rows are written
  // per position into gamma[L * S].
  void log_counts(std::span<const Symbol> x, const std::vector<double>& la,
                  const std::vector<double>& lb, double log_z, std::vector<double>& xi,
                  std::vector<double>& gamma) const {
    const std::size_t len = x.size();
    const std::size_t vs = v_ * s_;
    gamma.assign(len * s_, 0.0);
    std::size_t dest[kMaxCounted + 1];
    for (std::size_t i = 0; i < len; ++i) {
      const double* fa = la.data() + i * vs;
      const double* fb = lb.data() + i * vs;
      for (std::size_t v = 0; v < v_; ++v) {
        for (std::size_t s = 0; s < s_; ++s) {
          const double a = fa[v * s_ + s];
          const double b = fb[v * s_ + s];
          if (a != kNegInf && b != kNegInf) gamma[i * s_ + s] += std::exp(a + b - log_z);
        }
      }
      if (i + 1 == len) break;
      const double* next = lb.data() + (i + 1) * vs;
      const double* le = &log_emission_[x[i + 1] * s_];
      for (std::size_t v = 0; v < v_; ++v) {
        destinations(v, dest);
        for (std::size_t s = 0; s < s_; ++s) {
          const double a = fa[v * s_ + s];
          if (a == kNegInf) continue;
          for (std::size_t e = out_offset_[s]; e < out_offset_[s + 1]; ++e) {
            const double term = edge_log_term(e, le, next, dest);
            if (term != kNegInf) xi[e] += std::exp(a + term - log_z);
          }
        }
      }
    }
  }

  std::size_t out_edge(std::size_t s, std::size_t j) const { return out_offset_[s] + j; }
  std::size_t edge_count() const { return out_to_.size(); }

 private:
  std::size_t index_after_start(int k) const {
    return caps_.increment(0, static_cast<std::size_t>(k));
  }

  double incoming_sum(const double* slice, std::size_t t) const {
    double sum = 0.0;
    for (std::size_t e = in_offset_[t]; e < in_offset_[t + 1]; ++e) {
      sum += slice[in_from_[e]] * in_prob_[e];
    }
    return sum;
  }

  double incoming_log_sum(const double* slice, std::size_t t) const {
    double m = kNegInf;
    for (std::size_t e = in_offset_[t]; e < in_offset_[t + 1]; ++e) {
      m = std::max(m, slice[in_from_[e]] + in_logp_[e]);
    }
    if (m == kNegInf) return kNegInf;
    double sum = 0.0;
    for (std::size_t e = in_offset_[t]; e < in_offset_[t + 1]; ++e) {
      sum += std::exp(slice[in_from_[e]] + in_logp_[e] - m);
    }
    return m + std::log(sum);
  }

  // log p(e) + log e(t, x_{i+1}) + log beta_{i+1}(dest, t) for edge e into t.
  double edge_log_term(std::size_t e, const double* le, const double* next,
                       const std::size_t* dest) const {
    const auto t = static_cast<std::size_t>(out_to_[e]);
    const std::size_t j = static_cast<std::size_t>(slot_[t] + 1);
    return out_logp_[e] + le[t] + next[dest[j] * s_ + t];
  }

  // log(m) + scale to within ln 2, without calling log.
  static double log_magnitude(double m, double scale) {
    if (!(m > 0.0) || scale == kNegInf) return kNegInf;
    return scale + std::ilogb(m) * std::numbers::ln2;
  }

  void log_masses(const double* mant, const double* scale, std::vector<double>& mass) const {
    for (std::size_t v = 0; v < v_; ++v) {
      double sum = 0.0;
      for (std::size_t s = 0; s < s_; ++s) sum += mant[v * s_ + s];
      mass[v] = log_magnitude(sum, scale[v]);
    }
  }

  static bool gap(double scale, double ref) { return scale != kNegInf && scale - ref < -kMaxGap; }

  void destinations(std::size_t v, std::size_t* dest) const {
    dest[0] = v;
    for (std::size_t k = 0; k < n_; ++k) dest[k + 1] = inc_[v * n_ + k];
  }

  static double factor(double scale, double ref) {
    if (scale == ref) return 1.0;
    return scaled_factor(scale, ref);
  }

  // Records the slice scale, rescaling the mantissas by an exact power of
  // two only when their sum drifts far from one.
  static void settle_impl(double* slice, std::size_t n, double sum, double ref, double& scale) {
    if (!(sum > 0.0)) {
      scale = kNegInf;
      return;
    }
    int exponent = 0;
    std::frexp(sum, &exponent);
    if (exponent > kRescaleExponent || exponent < -kRescaleExponent) {
      // Per element: 2^-exponent itself overflows when the sum is subnormal.
      for (std::size_t s = 0; s < n; ++s) slice[s] = std::ldexp(slice[s], -exponent);
      scale = ref + exponent * std::numbers::ln2;
    } else {
      scale = ref;
    }
  }
  void settle(double* slice, double sum, double ref, double& scale) const {
    settle_impl(slice, s_, sum, ref, scale);
  }

  const HmmTopology& topology_;
  const VisitCaps& caps_;
  std::size_t s_ = 0;
  std::size_t a_ = 0;
  std::size_t v_ = 0;
  std::size_t n_ = 0;
  std::vector<int> slot_;
  std::vector<double> start_;
  std::vector<double> emission_;  // symbol-major
  std::vector<double> log_emission_;
  std::vector<std::size_t> out_offset_;
  std::vector<int> out_to_;
  std::vector<double> out_prob_;
  std::vector<double> out_logp_;
  std::vector<std::size_t> in_offset_;
  std::vector<int> in_from_;
  std::vector<double> in_prob_;
  std::vector<double> in_logp_;
  std::vector<int> comp_;
  std::vector<std::size_t> inc_;
  std::vector<std::size_t> strides_;
  std::vector<int> caps_vec_;

 public:
  // Lattice field access for the free functions below.
  static void fill_forward(const LatticeEngine& engine, std::span<const Symbol> x,
                           VisitLattice& lattice) {
    engine.check(x);
    lattice.length_ = x.size();
    lattice.states_ = engine.s_;
    lattice.visits_ = engine.v_;
    lattice.caps_ = engine.caps_;
    lattice.bwd_.clear();
    lattice.bwd_scale_.clear();
    lattice.log_space_ = false;
    engine.forward(x, lattice.fwd_, lattice.fwd_scale_);
    lattice.log_likelihood_ = log_sum_exp(final_log_joint(engine, lattice));
    lattice.log_evidence_ = lattice.log_likelihood_;
  }

  static void fill_backward(const LatticeEngine& engine, std::span<const Symbol> x,
                            const std::optional<Response>& response, VisitLattice& lattice) {
    engine.check(x);
    const std::size_t len = x.size();
    const std::size_t vs = engine.v_ * engine.s_;
    const bool has_forward = !lattice.fwd_.empty() && lattice.length_ == len;
    if (!has_forward) {
      lattice.fwd_.clear();
      lattice.fwd_scale_.clear();
      lattice.log_space_ = false;
    }
    lattice.length_ = len;
    lattice.states_ = engine.s_;
    lattice.visits_ = engine.v_;
    lattice.caps_ = engine.caps_;
    const auto base = engine.base_case(response);
    bool lossy = lattice.log_space_;
    if (!lossy) {
      lattice.bwd_.assign(len * vs, 0.0);
      lattice.bwd_scale_.assign(len * engine.v_, kNegInf);
      lossy = engine.backward_init(base, lattice.bwd_.data() + (len - 1) * vs,
                                   lattice.bwd_scale_.data() + (len - 1) * engine.v_);
      std::vector<double> eb, peak;
      for (std::size_t i = len - 1; i-- > 0;) {
        engine.emission_times(x[i + 1], lattice.bwd_.data() + (i + 1) * vs,
                              lattice.bwd_scale_.data() + (i + 1) * engine.v_, eb, peak);
        lossy = engine.backward_step(eb, peak, lattice.bwd_scale_.data() + (i + 1) * engine.v_,
                                     lattice.bwd_.data() + i * vs,
                                     lattice.bwd_scale_.data() + i * engine.v_) ||
                lossy;
      }
      // With a forward table the exact test is that every position carries
      // the whole posterior mass.
      if (has_forward) lossy = !engine.occupancy_is_complete(lattice, base);
    }
    if (lossy) {
      if (!lattice.log_space_ && has_forward) {
        engine.log_forward_table(x, lattice.fwd_);
        lattice.fwd_scale_.clear();
      }
      lattice.log_space_ = true;
      engine.log_backward_table(x, base, lattice.bwd_);
      lattice.bwd_scale_.clear();
    }
    // Evidence from the base of the backward pass: sum_s pi(s) e(s, x_0) beta_0.
    std::vector<double> terms;
    for (std::size_t s = 0; s < engine.s_; ++s) {
      const double p = engine.start_[s] * engine.emission_[x[0] * engine.s_ + s];
      if (p <= 0.0) continue;
      const std::size_t v = engine.slot_[s] >= 0 ? engine.index_after_start(engine.slot_[s]) : 0;
      terms.push_back(std::log(p) + lattice.log_backward(0, static_cast<StateIndex>(s), v));
    }
    lattice.log_evidence_ = log_sum_exp(terms);
    if (!response && !has_forward) lattice.log_likelihood_ = lattice.log_evidence_;
  }

  // log P(x, v) per visit index from a forward pass.
  static std::vector<double> final_log_joint(const LatticeEngine& engine,
                                             const VisitLattice& lattice) {
    const std::size_t i = lattice.length_ - 1;
    if (lattice.log_space_) {
      std::vector<double> out(engine.v_);
      const double* row = lattice.fwd_.data() + i * engine.v_ * engine.s_;
      for (std::size_t v = 0; v < engine.v_; ++v) {
        out[v] = log_sum_exp(std::span<const double>(row + v * engine.s_, engine.s_));
      }
      return out;
    }
    return engine.slice_log_mass(lattice.fwd_.data() + i * engine.v_ * engine.s_,
                                 lattice.fwd_scale_.data() + i * engine.v_);
  }

  // One example's contribution to the E-step.
  static double accumulate_example(const LatticeEngine& engine, std::span<const Symbol> x,
                                   const std::optional<Response>& response, VisitLattice& workspace,
                                   std::vector<double>& bwd_cur, std::vector<double>& bwd_next,
                                   std::vector<double>& scale_cur, std::vector<double>& scale_next,
                                   std::vector<double>& xi, std::vector<double>& start_counts,
                                   std::vector<std::vector<double>>& emission_counts,
                                   std::vector<double>* posterior) {
    fill_forward(engine, x, workspace);
    const std::size_t len = x.size();
    const std::size_t s_count = engine.s_;
    const std::size_t v_count = engine.v_;
    const std::size_t vs = v_count * s_count;
    const auto base = engine.base_case(response);
    std::vector<double> joint = final_log_joint(engine, workspace);
    for (std::size_t v = 0; v < v_count; ++v) joint[v] += base[v];
    const double log_z = log_sum_exp(joint);
    if (log_z == kNegInf) return kNegInf;
    if (posterior != nullptr) {
      posterior->resize(v_count);
      for (std::size_t v = 0; v < v_count; ++v) {
        (*posterior)[v] = joint[v] == kNegInf ? 0.0 : std::exp(joint[v] - log_z);
      }
    }

    // Counts go to per-example buffers first so that a scaled pass that
    // lost posterior mass can be redone in log space.
    std::vector<double> xi_ex(engine.edge_count(), 0.0);
    std::vector<double> gamma_rows(len * s_count, 0.0);
    bool lossy = false;
    {
      bwd_cur.resize(vs);
      bwd_next.resize(vs);
      scale_cur.resize(v_count);
      scale_next.resize(v_count);
      engine.backward_init(base, bwd_next.data(), scale_next.data());
      std::vector<double> gamma(s_count, 0.0);
      std::vector<double> eb, peak;
      auto add_position = [&](std::size_t i) {
        double total = 0.0;
        for (std::size_t s = 0; s < s_count; ++s) {
          gamma_rows[i * s_count + s] = gamma[s];
          total += gamma[s];
        }
        if (!(std::abs(total - 1.0) <= kOccupancyTolerance)) lossy = true;
        std::fill(gamma.begin(), gamma.end(), 0.0);
      };
      engine.accumulate_occupancy(workspace.fwd_.data() + (len - 1) * vs,
                                  workspace.fwd_scale_.data() + (len - 1) * v_count,
                                  bwd_next.data(), scale_next.data(), log_z, gamma);
      add_position(len - 1);
      for (std::size_t i = len - 1; i-- > 0 && !lossy;) {
        engine.emission_times(x[i + 1], bwd_next.data(), scale_next.data(), eb, peak);
        engine.backward_step_with_counts(eb, peak, scale_next.data(),
                                         workspace.fwd_.data() + i * vs,
                                         workspace.fwd_scale_.data() + i * v_count, log_z,
                                         bwd_cur.data(), scale_cur.data(), xi_ex, gamma);
        add_position(i);
        std::swap(bwd_cur, bwd_next);
        std::swap(scale_cur, scale_next);
      }
    }
    if (lossy) {
      engine.log_forward_table(x, workspace.fwd_);
      workspace.fwd_scale_.clear();
      workspace.log_space_ = true;
      std::vector<double> lb;
      engine.log_backward_table(x, base, lb);
      std::fill(xi_ex.begin(), xi_ex.end(), 0.0);
      engine.log_counts(x, workspace.fwd_, lb, log_z, xi_ex, gamma_rows);
    }
    for (std::size_t e = 0; e < xi_ex.size(); ++e) xi[e] += xi_ex[e];
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t s = 0; s < s_count; ++s) {
        emission_counts[s][x[i]] += gamma_rows[i * s_count + s];
      }
    }
    for (std::size_t s = 0; s < s_count; ++s) start_counts[s] += gamma_rows[s];
    return log_z;
  }
};

double VisitLattice::log_forward(std::size_t i, StateIndex s, std::size_t v) const {
  if (fwd_.empty()) throw InvalidInput("lattice has no forward table");
  const double m = fwd_.at((i * visits_ + v) * states_ + static_cast<std::size_t>(s));
  if (log_space_) return m;
  return m > 0.0 ? std::log(m) + fwd_scale_[i * visits_ + v] : kNegInf;
}

double VisitLattice::log_backward(std::size_t i, StateIndex s, std::size_t v) const {
  if (bwd_.empty()) throw InvalidInput("lattice has no backward table");
  const double m = bwd_.at((i * visits_ + v) * states_ + static_cast<std::size_t>(s));
  if (log_space_) return m;
  return m > 0.0 ? std::log(m) + bwd_scale_[i * visits_ + v] : kNegInf;
}

bool exceeds_budget(const VisitCaps& caps, const InferenceOptions& options) {
  return caps.overflowed() || caps.lattice_size() > options.lattice_budget;
}

VisitLattice forward(const HmmParams& params, const VisitCaps& caps, std::span<const Symbol> x) {
  LatticeEngine engine(params, caps);
  VisitLattice lattice;
  LatticeEngine::fill_forward(engine, x, lattice);
  return lattice;
}

VisitLattice backward(const HmmParams& params, const VisitCaps& caps, std::span<const Symbol> x,
                      const std::optional<Response>& response) {
  LatticeEngine engine(params, caps);
  VisitLattice lattice;
  LatticeEngine::fill_backward(engine, x, response, lattice);
  return lattice;
}

VisitLattice forward_backward(const HmmParams& params, const VisitCaps& caps,
                              std::span<const Symbol> x, const std::optional<Response>& response) {
  LatticeEngine engine(params, caps);
  VisitLattice lattice;
  LatticeEngine::fill_forward(engine, x, lattice);
  LatticeEngine::fill_backward(engine, x, response, lattice);
  return lattice;
}

VisitDistribution visit_distribution(const HmmParams& params, const VisitCaps& caps,
                                     std::span<const Symbol> x,
                                     const std::optional<Response>& response) {
  LatticeEngine engine(params, caps);
  VisitLattice lattice;
  LatticeEngine::fill_forward(engine, x, lattice);
  const auto base = engine.base_case(response);
  std::vector<double> joint = LatticeEngine::final_log_joint(engine, lattice);
  for (std::size_t v = 0; v < joint.size(); ++v) joint[v] += base[v];
  const double log_z = log_sum_exp(joint);
  if (log_z == kNegInf) throw DecodeFailure("sequence has zero probability under the model");
  std::vector<double> p(joint.size());
  for (std::size_t v = 0; v < p.size(); ++v) {
    p[v] = joint[v] == kNegInf ? 0.0 : std::exp(joint[v] - log_z);
  }
  const double log_normalizer = response ? log_z - lattice.log_sequence_likelihood() : 0.0;
  return VisitDistribution(caps, std::move(p), log_normalizer);
}

namespace {

// Uncapped expected visits from plain (count-free) state posteriors.
std::vector<double> occupancy_expected_visits(const HmmParams& params, std::span<const Symbol> x) {
  const VisitCaps none;
  LatticeEngine engine(params, none);
  VisitLattice workspace;
  std::vector<double> bc, bn, sc, sn, xi(engine.edge_count());
  const std::size_t n = params.topology().state_count();
  std::vector<double> start(n);
  std::vector<std::vector<double>> emission(n, std::vector<double>(params.alphabet().size()));
  const double log_z = LatticeEngine::accumulate_example(engine, x, std::nullopt, workspace, bc, bn,
                                                         sc, sn, xi, start, emission, nullptr);
  if (log_z == -std::numeric_limits<double>::infinity()) {
    throw DecodeFailure("sequence has zero probability under the model");
  }
  const auto& counted = params.topology().counted_states();
  std::vector<double> visits(counted.size(), 0.0);
  for (std::size_t k = 0; k < counted.size(); ++k) {
    for (double c : emission[static_cast<std::size_t>(counted[k])]) visits[k] += c;
  }
  return visits;
}

}  // namespace

std::vector<double> expected_visits(const HmmParams& params, const VisitCaps& caps,
                                    std::span<const Symbol> x,
                                    const std::optional<Response>& response,
                                    const InferenceOptions& options) {
  if (exceeds_budget(caps, options)) return occupancy_expected_visits(params, x);
  return visit_distribution(params, caps, x, response).mean();
}

ViterbiResult viterbi_decode(const HmmParams& params, const VisitCaps& caps,
                             std::span<const Symbol> x) {
  const auto& topology = params.topology();
  const std::size_t n = topology.state_count();
  const std::size_t a = params.alphabet().size();
  if (x.empty()) throw InvalidInput("empty input sequence");
  for (Symbol c : x) {
    if (c >= a) throw InvalidInput("symbol outside the alphabet");
  }
  auto safe_log = [](double p) { return p > 0.0 ? std::log(p) : kNegInf; };
  std::vector<double> log_emit(n * a);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < a; ++c) log_emit[s * a + c] = safe_log(params.emission()[s][c]);
  }
  std::vector<std::vector<double>> log_trans(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (double p : params.transition()[s]) log_trans[s].push_back(safe_log(p));
  }

  // best[i][s]: best log probability of x_{i+1}.. given S_i = s.
  const std::size_t len = x.size();
  std::vector<double> best(len * n, kNegInf);
  std::fill(best.begin() + static_cast<std::ptrdiff_t>((len - 1) * n), best.end(), 0.0);
  for (std::size_t i = len - 1; i-- > 0;) {
    for (std::size_t s = 0; s < n; ++s) {
      const auto& succ = topology.successors(static_cast<StateIndex>(s));
      double m = kNegInf;
      for (std::size_t j = 0; j < succ.size(); ++j) {
        const auto t = static_cast<std::size_t>(succ[j]);
        m = std::max(m, log_trans[s][j] + log_emit[t * a + x[i + 1]] + best[(i + 1) * n + t]);
      }
      best[i * n + s] = m;
    }
  }

  ViterbiResult result;
  result.path.states.reserve(len);
  double top = kNegInf;
  StateIndex current = -1;
  for (std::size_t s = 0; s < n; ++s) {
    const double v = safe_log(params.start()[s]) + log_emit[s * a + x[0]] + best[s];
    if (v > top) {
      top = v;
      current = static_cast<StateIndex>(s);
    }
  }
  if (current < 0 || top == kNegInf) {
    throw DecodeFailure("no state path has positive probability");
  }
  result.path.states.push_back(current);
  for (std::size_t i = 0; i + 1 < len; ++i) {
    const auto s = static_cast<std::size_t>(current);
    const auto& succ = topology.successors(current);
    double m = kNegInf;
    StateIndex next = -1;
    for (std::size_t j = 0; j < succ.size(); ++j) {
      const auto t = static_cast<std::size_t>(succ[j]);
      const double v = log_trans[s][j] + log_emit[t * a + x[i + 1]] + best[(i + 1) * n + t];
      if (v > m) {
        m = v;
        next = succ[j];
      }
    }
    current = next;
    result.path.states.push_back(current);
  }
  result.log_probability = top;
  result.visits = path_to_counts(result.path, topology, caps);
  return result;
}

SufficientStats SufficientStats::zeros(const HmmTopology& topology, std::size_t alphabet_size) {
  SufficientStats stats;
  const std::size_t n = topology.state_count();
  stats.start.assign(n, 0.0);
  stats.transition.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    stats.transition[s].assign(topology.successors(static_cast<StateIndex>(s)).size(), 0.0);
  }
  stats.emission.assign(n, std::vector<double>(alphabet_size, 0.0));
  return stats;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  if (start.size() != other.start.size()) throw InvalidInput("incompatible sufficient statistics");
  for (std::size_t s = 0; s < start.size(); ++s) {
    start[s] += other.start[s];
    for (std::size_t j = 0; j < transition[s].size(); ++j)
      transition[s][j] += other.transition[s][j];
    for (std::size_t c = 0; c < emission[s].size(); ++c) emission[s][c] += other.emission[s][c];
  }
  visit_posteriors.insert(visit_posteriors.end(), other.visit_posteriors.begin(),
                          other.visit_posteriors.end());
  expected_visits.insert(expected_visits.end(), other.expected_visits.begin(),
                         other.expected_visits.end());
  responses.insert(responses.end(), other.responses.begin(), other.responses.end());
  log_objective += other.log_objective;
  expected_visits_fallback = expected_visits_fallback || other.expected_visits_fallback;
  return *this;
}

SufficientStats e_step_stats(const HmmParams& params, const VisitCaps& caps,
                             const EncodedDataset& data, const RegressionParams* regression,
                             const InferenceOptions& options) {
  if (data.empty()) throw InvalidInput("e-step needs at least one example");
  const auto& topology = params.topology();
  const std::size_t n = topology.state_count();
  SufficientStats stats = SufficientStats::zeros(topology, params.alphabet().size());
  stats.responses = data.responses;

  const bool fallback = exceeds_budget(caps, options);
  stats.expected_visits_fallback = fallback;
  const VisitCaps none;
  LatticeEngine engine(params, fallback ? none : caps);

  VisitLattice workspace;
  std::vector<double> bc, bn, sc, sn, posterior;
  std::vector<double> xi(engine.edge_count(), 0.0);
  std::vector<std::vector<double>> emission(n, std::vector<double>(params.alphabet().size()));
  for (std::size_t ex = 0; ex < data.size(); ++ex) {
    std::optional<Response> response;
    if (regression != nullptr && !fallback) response = Response{data.responses[ex], *regression};
    double log_z = 0.0;
    try {
      if (fallback) {
        for (auto& row : emission) std::fill(row.begin(), row.end(), 0.0);
      }
      log_z = LatticeEngine::accumulate_example(
          engine, data.sequences[ex], response, workspace, bc, bn, sc, sn, xi, stats.start,
          fallback ? emission : stats.emission, fallback ? nullptr : &posterior);
    } catch (const Error& e) {
      rethrow_with_context(e, "example " + std::to_string(ex));
    }
    if (log_z == -std::numeric_limits<double>::infinity()) {
      throw DecodeFailure("example " + std::to_string(ex) + " has zero probability");
    }
    if (fallback) {
      std::vector<double> visits(topology.counted_count(), 0.0);
      for (std::size_t k = 0; k < visits.size(); ++k) {
        for (double c : emission[static_cast<std::size_t>(topology.counted_states()[k])]) {
          visits[k] += c;
        }
      }
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t c = 0; c < emission[s].size(); ++c) stats.emission[s][c] += emission[s][c];
      }
      if (regression != nullptr) {
        const double r =
            (data.responses[ex] - predict_mean(*regression, std::span<const double>(visits))) /
            regression->sigma;
        log_z += -0.5 * r * r - std::log(regression->sigma) - 0.91893853320467274178;
      }
      stats.expected_visits.push_back(std::move(visits));
    } else {
      stats.visit_posteriors.emplace_back(
          caps, posterior, response ? log_z - workspace.log_sequence_likelihood() : 0.0);
    }
    stats.log_objective += log_z;
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < stats.transition[s].size(); ++j) {
      stats.transition[s][j] = xi[engine.out_edge(s, j)];
    }
  }
  return stats;
}

double joint_objective(const HmmParams& params, const VisitCaps& caps,
                       const RegressionParams& regression, const EncodedDataset& data,
                       std::vector<std::size_t>* zero_evidence) {
  if (data.empty()) throw InvalidInput("objective needs at least one example");
  LatticeEngine engine(params, caps);
  VisitLattice lattice;
  double total = 0.0;
  for (std::size_t ex = 0; ex < data.size(); ++ex) {
    LatticeEngine::fill_forward(engine, data.sequences[ex], lattice);
    const auto base = engine.base_case(Response{data.responses[ex], regression});
    std::vector<double> joint = LatticeEngine::final_log_joint(engine, lattice);
    for (std::size_t v = 0; v < joint.size(); ++v) joint[v] += base[v];
    const double term = log_sum_exp(joint);
    if (term == kNegInf && zero_evidence != nullptr) zero_evidence->push_back(ex);
    total += term;
  }
  return total;
}

}  // namespace pathagg
