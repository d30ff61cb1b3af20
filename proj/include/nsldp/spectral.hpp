#pragma once

// Fourier-Galerkin representation of divergence-free velocity fields on the
// 2-torus [0, 2*pi)^2.
//
// A field is stored as one complex amplitude a_k per representative
// wavevector k of each +/-k pair (k1 > 0, or k1 == 0 and k2 > 0).  The
// physical field is
//
//     u(x) = (1/sqrt 2) * sum_k [ a_k e^{i k.x} + conj(a_k) e^{-i k.x} ] k_perp/|k|
//
// with k_perp = (-k2, k1).  With the mean-normalised L2 inner product the real
// and imaginary parts of a_k are coordinates along an orthonormal basis of
// Stokes eigenfunctions, so ||u||^2 = sum_k |a_k|^2 and L acts as a_k -> |k|^2 a_k.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nsldp {

using Complex = std::complex<double>;

struct Wavevector {
  int k1 = 0;
  int k2 = 0;

  int norm2() const noexcept { return k1 * k1 + k2 * k2; }
  friend bool operator==(const Wavevector&, const Wavevector&) = default;
};

/// One entry of the Galerkin convolution for B(u, v):
///   out[q] += i * weight * alpha_u(p) * alpha_v(r),   p + r = q,
/// where alpha(k) = a_k for a representative k and alpha(-k) = -conj(a_k).
struct TriadEntry {
  int out = 0;
  int p_mode = 0;
  int r_mode = 0;
  bool p_neg = false;
  bool r_neg = false;
  double weight = 0.0;
  int p_slot = 0;  // 2 * p_mode + p_neg
  int r_slot = 0;
};

class BasisSpec {
 public:
  /// Every representative mode with 0 < |k|_inf <= cutoff, in lexicographic order.
  static std::shared_ptr<const BasisSpec> make(int cutoff);

  int cutoff() const noexcept { return cutoff_; }
  std::size_t size() const noexcept { return modes_.size(); }
  const std::vector<Wavevector>& modes() const noexcept { return modes_; }
  const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
  const Wavevector& mode(std::size_t i) const { return modes_.at(i); }
  double eigenvalue(std::size_t i) const { return eigenvalues_.at(i); }

  /// Smallest eigenvalue (1 on the unit torus).
  double lambda1() const noexcept { return eigenvalues_.empty() ? 0.0 : min_eigenvalue_; }

  /// Index of k among the representatives, or -1 when k is not a representative
  /// mode of this basis.  `negated` reports whether -k was matched instead.
  int find(Wavevector k, bool* negated = nullptr) const noexcept;

  /// Mode indices sorted by (eigenvalue, basis order).
  const std::vector<int>& spectral_order() const noexcept { return spectral_order_; }

  const std::vector<TriadEntry>& triads() const noexcept { return triads_; }

 private:
  BasisSpec() = default;

  int cutoff_ = 0;
  double min_eigenvalue_ = 0.0;
  std::vector<Wavevector> modes_;
  std::vector<double> eigenvalues_;
  std::vector<int> spectral_order_;
  std::vector<int> lattice_index_;  // (2K+1)^2 table, signed: +(i+1), -(i+1), or 0
  std::vector<TriadEntry> triads_;
};

using BasisPtr = std::shared_ptr<const BasisSpec>;

/// Divergence-free, real, zero-mean velocity field.  Value type; copies share
/// the (immutable) basis.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(BasisPtr basis);
  SpectralField(BasisPtr basis, std::vector<Complex> amps);

  static SpectralField zero(BasisPtr basis) { return SpectralField(std::move(basis)); }
  /// Unit amplitude (real part 1) on mode `index`.
  static SpectralField unit(BasisPtr basis, std::size_t index, Complex value = 1.0);

  const BasisPtr& basis() const noexcept { return basis_; }
  std::size_t size() const noexcept { return amps_.size(); }
  bool empty() const noexcept { return amps_.empty(); }

  std::span<const Complex> amps() const noexcept { return amps_; }
  std::span<Complex> amps() noexcept { return amps_; }
  Complex operator[](std::size_t i) const { return amps_[i]; }
  Complex& operator[](std::size_t i) { return amps_[i]; }

  /// Throws InvalidArgument unless both fields live on the same basis.
  void require_same_basis(const SpectralField& other, const char* op) const;

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);
  /// this += s * o
  SpectralField& axpy(double s, const SpectralField& o);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

 private:
  BasisPtr basis_;
  std::vector<Complex> amps_;
};

/// Real L2 inner product (u, v) = sum Re(u_k conj(v_k)).
double inner(const SpectralField& u, const SpectralField& v);
/// H-norm ||u||.
double norm_h(const SpectralField& u);
/// V-norm |u|_V = (sum lambda_k |u_k|^2)^{1/2}.
double norm_v(const SpectralField& u);
/// H-distance ||u - v||.
double distance(const SpectralField& u, const SpectralField& v);

/// L u: multiply each amplitude by its eigenvalue.
SpectralField stokes_apply(const SpectralField& u);

/// Galerkin-truncated Leray-projected advection Pi (u . grad) v, evaluated by
/// direct mode-pair convolution.
SpectralField bilinear(const SpectralField& u, const SpectralField& v);

/// Gradient with respect to d of (B(d, u) + B(u, d), z), i.e. the transpose of
/// the linearisation of B(u, u) at u applied to z.
SpectralField bilinear_linearized_adjoint(const SpectralField& u, const SpectralField& z);

/// Orthogonal projection onto the n modes of smallest eigenvalue.
SpectralField project_low(const SpectralField& u, std::size_t n);

/// Mask of the modes kept by project_low(., n).
std::vector<bool> low_mode_mask(const BasisSpec& basis, std::size_t n);

/// Noise coefficients b_k of the forcing sum_k b_k dbeta_k e_k.
class NoiseSpec {
 public:
  NoiseSpec() = default;
  /// b_k = b0 * |k|^{-decay}.
  static NoiseSpec power_law(BasisPtr basis, double b0 = 1.0, double decay = 3.0);
  /// Explicit weights, one per mode; all must be positive.
  static NoiseSpec custom(BasisPtr basis, std::vector<double> weights);

  const BasisPtr& basis() const noexcept { return basis_; }
  std::span<const double> b() const noexcept { return b_; }
  double b(std::size_t i) const { return b_.at(i); }
  double b0() const noexcept { return b0_; }
  /// NaN for custom weights.
  double decay_exponent() const noexcept { return decay_; }

  /// sum_k lambda_k b_k^2 over the truncated basis, counting both real
  /// coordinates of each complex mode.
  double trace_v() const noexcept;

 private:
  BasisPtr basis_;
  std::vector<double> b_;
  double b0_ = 1.0;
  double decay_ = 3.0;
};

struct FieldNorms {
  double h = 0.0;
  double v = 0.0;
  double htheta = 0.0;
};

/// H, V and H_theta norms; the latter weights each amplitude by 1/b_k.
FieldNorms norms(const SpectralField& u, const NoiseSpec& noise);
double norm_htheta(const SpectralField& u, const NoiseSpec& noise);

/// Writes "k1,k2,re,im" records in basis order (with a header line).
void write_field_csv(std::ostream& os, const SpectralField& u);
void save_field_csv(const std::string& path, const SpectralField& u);
/// Reads a field written by write_field_csv.  When `basis` is null the cutoff
/// is inferred from the largest |k|_inf in the file.
SpectralField read_field_csv(std::istream& is, BasisPtr basis = nullptr);
SpectralField load_field_csv(const std::string& path, BasisPtr basis = nullptr);

}  // namespace nsldp
