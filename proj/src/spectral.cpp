#include "nsldp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nsldp/errors.hpp"

namespace nsldp {

namespace {

bool is_representative(Wavevector k) { return k.k1 > 0 || (k.k1 == 0 && k.k2 > 0); }

}  // namespace

std::shared_ptr<const BasisSpec> BasisSpec::make(int cutoff) {
  if (cutoff < 1) throw InvalidArgument("basis cutoff must be >= 1, got " + std::to_string(cutoff));

  std::shared_ptr<BasisSpec> b(new BasisSpec());
  b->cutoff_ = cutoff;
  for (int k1 = -cutoff; k1 <= cutoff; ++k1)
    for (int k2 = -cutoff; k2 <= cutoff; ++k2)
      if (is_representative({k1, k2})) b->modes_.push_back({k1, k2});

  b->eigenvalues_.reserve(b->modes_.size());
  for (const auto& k : b->modes_) b->eigenvalues_.push_back(static_cast<double>(k.norm2()));
  b->min_eigenvalue_ = *std::min_element(b->eigenvalues_.begin(), b->eigenvalues_.end());

  const int side = 2 * cutoff + 1;
  b->lattice_index_.assign(static_cast<std::size_t>(side * side), 0);
  for (std::size_t i = 0; i < b->modes_.size(); ++i) {
    const auto k = b->modes_[i];
    const int id = static_cast<int>(i) + 1;
    b->lattice_index_[(k.k1 + cutoff) * side + (k.k2 + cutoff)] = id;
    b->lattice_index_[(-k.k1 + cutoff) * side + (-k.k2 + cutoff)] = -id;
  }

  b->spectral_order_.resize(b->modes_.size());
  std::iota(b->spectral_order_.begin(), b->spectral_order_.end(), 0);
  std::stable_sort(b->spectral_order_.begin(), b->spectral_order_.end(),
                   [&](int x, int y) { return b->eigenvalues_[x] < b->eigenvalues_[y]; });

  // Triad table: for every retained output q and every lattice p with q - p
  // also retained, weight = (p x r)(r . q) / (sqrt2 |p||r||q|).
  for (std::size_t qi = 0; qi < b->modes_.size(); ++qi) {
    const auto q = b->modes_[qi];
    const double qn = std::sqrt(static_cast<double>(q.norm2()));
    for (int p1 = -cutoff; p1 <= cutoff; ++p1) {
      for (int p2 = -cutoff; p2 <= cutoff; ++p2) {
        const Wavevector p{p1, p2};
        const Wavevector r{q.k1 - p1, q.k2 - p2};
        bool p_neg = false, r_neg = false;
        const int pi = b->find(p, &p_neg);
        const int ri = b->find(r, &r_neg);
        if (pi < 0 || ri < 0) continue;
        const double cross = static_cast<double>(p.k1 * r.k2 - p.k2 * r.k1);
        const double dot = static_cast<double>(r.k1 * q.k1 + r.k2 * q.k2);
        if (cross == 0.0 || dot == 0.0) continue;
        const double pn = std::sqrt(static_cast<double>(p.norm2()));
        const double rn = std::sqrt(static_cast<double>(r.norm2()));
        b->triads_.push_back({static_cast<int>(qi), pi, ri, p_neg, r_neg,
                              cross * dot / (std::sqrt(2.0) * pn * rn * qn), 2 * pi + (p_neg ? 1 : 0),
                              2 * ri + (r_neg ? 1 : 0)});
      }
    }
  }
  return b;
}

int BasisSpec::find(Wavevector k, bool* negated) const noexcept {
  if (std::abs(k.k1) > cutoff_ || std::abs(k.k2) > cutoff_) return -1;
  const int side = 2 * cutoff_ + 1;
  const int id = lattice_index_[(k.k1 + cutoff_) * side + (k.k2 + cutoff_)];
  if (id == 0) return -1;
  if (negated) *negated = id < 0;
  return std::abs(id) - 1;
}

SpectralField::SpectralField(BasisPtr basis) : basis_(std::move(basis)) {
  if (!basis_) throw InvalidArgument("SpectralField requires a basis");
  amps_.assign(basis_->size(), Complex{});
}

SpectralField::SpectralField(BasisPtr basis, std::vector<Complex> amps)
    : basis_(std::move(basis)), amps_(std::move(amps)) {
  if (!basis_) throw InvalidArgument("SpectralField requires a basis");
  if (amps_.size() != basis_->size())
    throw InvalidArgument("amplitude count " + std::to_string(amps_.size()) +
                          " does not match basis size " + std::to_string(basis_->size()));
}

SpectralField SpectralField::unit(BasisPtr basis, std::size_t index, Complex value) {
  SpectralField f(std::move(basis));
  if (index >= f.size()) throw InvalidArgument("mode index out of range");
  f.amps_[index] = value;
  return f;
}

void SpectralField::require_same_basis(const SpectralField& other, const char* op) const {
  if (!basis_ || !other.basis_)
    throw InvalidArgument(std::string(op) + ": field without basis");
  if (basis_ != other.basis_ && basis_->cutoff() != other.basis_->cutoff())
    throw InvalidArgument(std::string(op) + ": basis mismatch (K=" +
                          std::to_string(basis_->cutoff()) + " vs K=" +
                          std::to_string(other.basis_->cutoff()) + ")");
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  require_same_basis(o, "add");
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] += o.amps_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  require_same_basis(o, "subtract");
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] -= o.amps_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& a : amps_) a *= s;
  return *this;
}

SpectralField& SpectralField::axpy(double s, const SpectralField& o) {
  require_same_basis(o, "axpy");
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] += s * o.amps_[i];
  return *this;
}

bool SpectralField::all_finite() const noexcept {
  return std::all_of(amps_.begin(), amps_.end(),
                     [](Complex a) { return std::isfinite(a.real()) && std::isfinite(a.imag()); });
}

double SpectralField::max_abs() const noexcept {
  double m = 0.0;
  for (auto a : amps_) m = std::max(m, std::abs(a));
  return m;
}

double inner(const SpectralField& u, const SpectralField& v) {
  u.require_same_basis(v, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    s += u[i].real() * v[i].real() + u[i].imag() * v[i].imag();
  return s;
}

double norm_h(const SpectralField& u) {
  double s = 0.0;
  for (auto a : u.amps()) s += std::norm(a);
  return std::sqrt(s);
}

double norm_v(const SpectralField& u) {
  const auto& lam = u.basis()->eigenvalues();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += lam[i] * std::norm(u[i]);
  return std::sqrt(s);
}

double distance(const SpectralField& u, const SpectralField& v) {
  u.require_same_basis(v, "distance");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::norm(u[i] - v[i]);
  return std::sqrt(s);
}

SpectralField stokes_apply(const SpectralField& u) {
  SpectralField out = u;
  const auto& lam = u.basis()->eigenvalues();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= lam[i];
  return out;
}

namespace {

inline Complex alpha(const SpectralField& f, int mode, bool neg) {
  const Complex a = f[static_cast<std::size_t>(mode)];
  return neg ? -std::conj(a) : a;
}

// Accumulates g += conj-gradient of Re(c * alpha(mode, neg)) with respect to
// the amplitude a_mode, where alpha = a or -conj(a).
inline void accumulate_grad(SpectralField& g, int mode, bool neg, Complex c) {
  g[static_cast<std::size_t>(mode)] += neg ? -c : std::conj(c);
}

// alpha(k) and alpha(-k) for every mode, indexed by TriadEntry slots.
std::vector<Complex> lattice_slots(const SpectralField& f) {
  std::vector<Complex> s(2 * f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    s[2 * i] = f[i];
    s[2 * i + 1] = -std::conj(f[i]);
  }
  return s;
}

}  // namespace

SpectralField bilinear(const SpectralField& u, const SpectralField& v) {
  u.require_same_basis(v, "bilinear");
  const auto su = lattice_slots(u);
  const auto sv = (&u == &v) ? su : lattice_slots(v);
  std::vector<double> re(u.size()), im(u.size());
  for (const auto& t : u.basis()->triads()) {
    const Complex a = su[t.p_slot], b = sv[t.r_slot];
    re[t.out] += t.weight * (a.real() * b.real() - a.imag() * b.imag());
    im[t.out] += t.weight * (a.real() * b.imag() + a.imag() * b.real());
  }
  // multiply by i
  std::vector<Complex> acc(u.size());
  for (std::size_t q = 0; q < acc.size(); ++q) acc[q] = Complex(-im[q], re[q]);
  return SpectralField(u.basis(), std::move(acc));
}

SpectralField bilinear_linearized_adjoint(const SpectralField& u, const SpectralField& z) {
  u.require_same_basis(z, "bilinear_linearized_adjoint");
  // (B(d,u) + B(u,d), z) = sum_t Re( i w [alpha_d(p) alpha_u(r) + alpha_u(p) alpha_d(r)] conj z_q )
  SpectralField g(u.basis());
  const Complex i_unit(0.0, 1.0);
  for (const auto& t : u.basis()->triads()) {
    const Complex zq = std::conj(z[static_cast<std::size_t>(t.out)]);
    const Complex base = i_unit * t.weight * zq;
    accumulate_grad(g, t.p_mode, t.p_neg, base * alpha(u, t.r_mode, t.r_neg));
    accumulate_grad(g, t.r_mode, t.r_neg, base * alpha(u, t.p_mode, t.p_neg));
  }
  return g;
}

std::vector<bool> low_mode_mask(const BasisSpec& basis, std::size_t n) {
  std::vector<bool> keep(basis.size(), false);
  const auto& order = basis.spectral_order();
  for (std::size_t j = 0; j < std::min(n, order.size()); ++j) keep[order[j]] = true;
  return keep;
}

SpectralField project_low(const SpectralField& u, std::size_t n) {
  SpectralField out = u;
  const auto keep = low_mode_mask(*u.basis(), n);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!keep[i]) out[i] = Complex{};
  return out;
}

NoiseSpec NoiseSpec::power_law(BasisPtr basis, double b0, double decay) {
  if (!basis) throw InvalidArgument("NoiseSpec requires a basis");
  if (!(b0 > 0.0) || !std::isfinite(b0)) throw InvalidArgument("noise amplitude b0 must be positive");
  if (!std::isfinite(decay)) throw InvalidArgument("noise decay exponent must be finite");
  NoiseSpec n;
  n.basis_ = basis;
  n.b0_ = b0;
  n.decay_ = decay;
  n.b_.reserve(basis->size());
  for (double lam : basis->eigenvalues()) n.b_.push_back(b0 * std::pow(lam, -0.5 * decay));
  return n;
}

NoiseSpec NoiseSpec::custom(BasisPtr basis, std::vector<double> weights) {
  if (!basis) throw InvalidArgument("NoiseSpec requires a basis");
  if (weights.size() != basis->size()) throw InvalidArgument("one noise weight per mode required");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("noise weights must be positive");
  NoiseSpec n;
  n.basis_ = std::move(basis);
  n.b_ = std::move(weights);
  n.b0_ = std::numeric_limits<double>::quiet_NaN();
  n.decay_ = std::numeric_limits<double>::quiet_NaN();
  return n;
}

double NoiseSpec::trace_v() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < b_.size(); ++i) s += 2.0 * basis_->eigenvalue(i) * b_[i] * b_[i];
  return s;
}

double norm_htheta(const SpectralField& u, const NoiseSpec& noise) {
  if (noise.basis()->cutoff() != u.basis()->cutoff())
    throw InvalidArgument("norm_htheta: noise and field bases differ");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::norm(u[i]) / (noise.b(i) * noise.b(i));
  return std::sqrt(s);
}

FieldNorms norms(const SpectralField& u, const NoiseSpec& noise) {
  return {norm_h(u), norm_v(u), norm_htheta(u, noise)};
}

void write_field_csv(std::ostream& os, const SpectralField& u) {
  os << "k1,k2,re,im\n";
  const auto& modes = u.basis()->modes();
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t i = 0; i < u.size(); ++i) {
    line.str({});
    line << modes[i].k1 << ',' << modes[i].k2 << ',' << u[i].real() << ',' << u[i].imag() << '\n';
    os << line.str();
  }
}

void save_field_csv(const std::string& path, const SpectralField& u) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open " + path + " for writing");
  write_field_csv(os, u);
}

SpectralField read_field_csv(std::istream& is, BasisPtr basis) {
  struct Record {
    Wavevector k;
    Complex a;
  };
  std::vector<Record> recs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("k1", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Record r;
    double re = 0, im = 0;
    if (!(ls >> r.k.k1 >> r.k.k2 >> re >> im))
      throw InvalidArgument("malformed field record on line " + std::to_string(lineno));
    r.a = {re, im};
    recs.push_back(r);
  }
  if (!basis) {
    int cutoff = 0;
    for (const auto& r : recs) cutoff = std::max({cutoff, std::abs(r.k.k1), std::abs(r.k.k2)});
    basis = BasisSpec::make(cutoff);
  }
  if (recs.size() != basis->size())
    throw InvalidArgument("field file has " + std::to_string(recs.size()) + " records, basis expects " +
                          std::to_string(basis->size()));
  SpectralField f(basis);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!(recs[i].k == basis->mode(i)))
      throw InvalidArgument("field record " + std::to_string(i) + " is not in basis order");
    f[i] = recs[i].a;
  }
  return f;
}

SpectralField load_field_csv(const std::string& path, BasisPtr basis) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open " + path);
  return read_field_csv(is, std::move(basis));
}

}  // namespace nsldp
