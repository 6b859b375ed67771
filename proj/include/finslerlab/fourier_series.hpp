#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "finslerlab/error.hpp"
#include "finslerlab/vec2.hpp"

namespace finslerlab
{
/// Integer frequency (kx, ky) of a torus Fourier mode.
struct Mode
{
  int kx = 0;
  int ky = 0;

  friend constexpr auto operator<=>(const Mode&, const Mode&) = default;
};

/// Cosine/sine coefficient pair of one mode.
struct ModeCoefficients
{
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

/// Real truncated Fourier series on T^2:
///
///   h(x) = offset + sum_k [ a_k cos(2 pi k.x) + b_k sin(2 pi k.x) ].
///
/// Modes are stored in canonical form (kx > 0, or kx == 0 and ky > 0); adding
/// a term with a non-canonical mode folds it onto its canonical partner, and
/// the zero mode folds into the offset. Equal functions therefore have equal
/// coefficient tables, which makes arithmetic on coefficients exact.
///
/// Elements of E (smooth functions) and of E+ (positive conformal factors)
/// share this type; positivity is checked where it is required.
class FourierSeries
{
public:
  FourierSeries() = default;

  explicit FourierSeries(double offset) : offset_(offset) {}

  static FourierSeries constant(double c) { return FourierSeries(c); }

  /// Adds a*cos(2 pi k.x) + b*sin(2 pi k.x).
  FourierSeries& add_term(Mode k, double cos_coeff, double sin_coeff)
  {
    if (!std::isfinite(cos_coeff) || !std::isfinite(sin_coeff))
    {
      throw DomainError("non-finite Fourier coefficient");
    }
    if (k.kx == 0 && k.ky == 0)
    {
      offset_ += cos_coeff;
      return *this;
    }
    if (k.kx < 0 || (k.kx == 0 && k.ky < 0))
    {
      k = {-k.kx, -k.ky};
      sin_coeff = -sin_coeff;
    }
    auto& c = terms_[k];
    c.cos_coeff += cos_coeff;
    c.sin_coeff += sin_coeff;
    if (c.cos_coeff == 0.0 && c.sin_coeff == 0.0)
    {
      terms_.erase(k);
    }
    return *this;
  }

  FourierSeries& set_offset(double c)
  {
    offset_ = c;
    return *this;
  }

  double offset() const { return offset_; }
  const std::map<Mode, ModeCoefficients>& terms() const { return terms_; }

  /// True if the series has no non-constant mode.
  bool is_constant() const { return terms_.empty(); }

  int max_frequency() const
  {
    int m = 0;
    for (const auto& [k, c] : terms_)
    {
      m = std::max({m, std::abs(k.kx), std::abs(k.ky)});
    }
    return m;
  }

  double operator()(const Vec2& p) const
  {
    double v = offset_;
    for (const auto& [k, c] : terms_)
    {
      const double th = phase(k, p);
      v += c.cos_coeff * std::cos(th) + c.sin_coeff * std::sin(th);
    }
    return v;
  }

  /// Value and gradient in one pass.
  std::pair<double, Vec2> value_and_gradient(const Vec2& p) const
  {
    double v = offset_;
    Vec2 g;
    for (const auto& [k, c] : terms_)
    {
      const double th = phase(k, p);
      const double cs = std::cos(th);
      const double sn = std::sin(th);
      v += c.cos_coeff * cs + c.sin_coeff * sn;
      const double d = kTwoPi * (c.sin_coeff * cs - c.cos_coeff * sn);
      g.x += d * k.kx;
      g.y += d * k.ky;
    }
    return {v, g};
  }

  /// Mixed partial derivative d^order_x d^order_y, computed exactly from the
  /// coefficients.
  double partial(const Vec2& p, int order_x, int order_y) const
  {
    const int r = order_x + order_y;
    double v = r == 0 ? offset_ : 0.0;
    for (const auto& [k, c] : terms_)
    {
      const double scale = std::pow(kTwoPi * k.kx, order_x) * std::pow(kTwoPi * k.ky, order_y);
      if (scale == 0.0)
      {
        continue;
      }
      // r-th derivative of cos/sin shifts the phase by r*pi/2.
      const double th = phase(k, p) + r * std::numbers::pi / 2.0;
      v += scale * (c.cos_coeff * std::cos(th) + c.sin_coeff * std::sin(th));
    }
    return v;
  }

  /// Upper bound on the Lipschitz constant: sum of |2 pi k| * |(a_k, b_k)|.
  double lipschitz_bound() const
  {
    double l = 0.0;
    for (const auto& [k, c] : terms_)
    {
      l += kTwoPi * std::hypot(k.kx, k.ky) * std::hypot(c.cos_coeff, c.sin_coeff);
    }
    return l;
  }

  /// Minimum over the uniform resolution x resolution grid of [0,1)^2.
  double grid_minimum(int resolution = 128) const
  {
    double m = offset_;
    if (terms_.empty())
    {
      return m;
    }
    m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < resolution; ++i)
    {
      for (int j = 0; j < resolution; ++j)
      {
        m = std::min(m, (*this)({double(i) / resolution, double(j) / resolution}));
      }
    }
    return m;
  }

  /// Membership in E+ checked on a dense grid.
  bool is_positive(int resolution = 128) const { return grid_minimum(resolution) > 0.0; }

  /// C^k norms on a grid: entry k is the max over the grid of |d^a h| for all
  /// multi-indices |a| <= k.
  std::vector<double> ck_norms(int k_max, int resolution = 64) const
  {
    std::vector<double> by_order(static_cast<size_t>(k_max) + 1, 0.0);
    for (int i = 0; i < resolution; ++i)
    {
      for (int j = 0; j < resolution; ++j)
      {
        const Vec2 p{double(i) / resolution, double(j) / resolution};
        for (int r = 0; r <= k_max; ++r)
        {
          for (int ox = 0; ox <= r; ++ox)
          {
            by_order[r] = std::max(by_order[r], std::abs(partial(p, ox, r - ox)));
          }
        }
      }
    }
    for (size_t r = 1; r < by_order.size(); ++r)
    {
      by_order[r] = std::max(by_order[r], by_order[r - 1]);
    }
    return by_order;
  }

  FourierSeries& operator+=(const FourierSeries& o)
  {
    offset_ += o.offset_;
    for (const auto& [k, c] : o.terms_)
    {
      add_term(k, c.cos_coeff, c.sin_coeff);
    }
    return *this;
  }

  FourierSeries& operator*=(double s)
  {
    offset_ *= s;
    if (s == 0.0)
    {
      terms_.clear();
      return *this;
    }
    for (auto& [k, c] : terms_)
    {
      c.cos_coeff *= s;
      c.sin_coeff *= s;
    }
    return *this;
  }

  friend FourierSeries operator+(FourierSeries a, const FourierSeries& b) { return a += b; }
  friend FourierSeries operator*(FourierSeries a, double s) { return a *= s; }
  friend FourierSeries operator*(double s, FourierSeries a) { return a *= s; }
  friend FourierSeries operator-(const FourierSeries& a, const FourierSeries& b)
  {
    return a + (-1.0) * b;
  }

  /// Pointwise product via the product-to-sum identities.
  friend FourierSeries operator*(const FourierSeries& a, const FourierSeries& b)
  {
    FourierSeries out(a.offset_ * b.offset_);
    for (const auto& [k, c] : a.terms_)
    {
      out.add_term(k, c.cos_coeff * b.offset_, c.sin_coeff * b.offset_);
    }
    for (const auto& [k, c] : b.terms_)
    {
      out.add_term(k, c.cos_coeff * a.offset_, c.sin_coeff * a.offset_);
    }
    for (const auto& [k1, c1] : a.terms_)
    {
      for (const auto& [k2, c2] : b.terms_)
      {
        const double a1 = c1.cos_coeff, b1 = c1.sin_coeff;
        const double a2 = c2.cos_coeff, b2 = c2.sin_coeff;
        out.add_term({k1.kx + k2.kx, k1.ky + k2.ky}, 0.5 * (a1 * a2 - b1 * b2),
                     0.5 * (a1 * b2 + b1 * a2));
        out.add_term({k1.kx - k2.kx, k1.ky - k2.ky}, 0.5 * (a1 * a2 + b1 * b2),
                     0.5 * (b1 * a2 - a1 * b2));
      }
    }
    return out;
  }

  friend bool operator==(const FourierSeries& a, const FourierSeries& b)
  {
    if (a.offset_ != b.offset_ || a.terms_.size() != b.terms_.size())
    {
      return false;
    }
    auto it = b.terms_.begin();
    for (const auto& [k, c] : a.terms_)
    {
      if (!(k == it->first) || c.cos_coeff != it->second.cos_coeff ||
          c.sin_coeff != it->second.sin_coeff)
      {
        return false;
      }
      ++it;
    }
    return true;
  }

private:
  static constexpr double kTwoPi = 2.0 * std::numbers::pi;

  static double phase(const Mode& k, const Vec2& p) { return kTwoPi * (k.kx * p.x + k.ky * p.y); }

  double offset_ = 0.0;
  std::map<Mode, ModeCoefficients> terms_;
};

/// Conformal factors are Fourier series that pass the positivity check.
using ConformalFactor = FourierSeries;

/// sin^2(pi (y - center)): a bump in y with its unique zero at y = center.
inline FourierSeries trough_bump_y(double center)
{
  // sin^2(u) = (1 - cos 2u) / 2 with 2u = 2 pi y - 2 pi center.
  const double ph = 2.0 * std::numbers::pi * center;
  FourierSeries h(0.5);
  h.add_term({0, 1}, -0.5 * std::cos(ph), -0.5 * std::sin(ph));
  return h;
}

}  // namespace finslerlab
