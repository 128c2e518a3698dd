#include "cmc/torus.hpp"

#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cmc {

TorusLattice::TorusLattice(cplx gamma1, cplx gamma2, int n1, int n2) : g1_(gamma1), g2_(gamma2), n1_(n1), n2_(n2) {
  if (n1 < 8 || n2 < 8) throw Error("TorusLattice: resolution must be at least 8 per generator");
  if (!(std::abs(gamma1) > 0) || !((gamma2 / gamma1).imag() > 0))
    throw Error("TorusLattice: generators must form an oriented basis (Im(gamma2/gamma1) > 0)");
  const double a1 = g1_.real(), b1 = g1_.imag(), a2 = g2_.real(), b2 = g2_.imag();
  const double d = a1 * b2 - b1 * a2;
  jx_s = b2 / d;
  jx_t = -b1 / d;
  jy_s = -a2 / d;
  jy_t = a1 / d;
}

std::pair<double, double> TorusLattice::coords(cplx z) const {
  const double a1 = g1_.real(), b1 = g1_.imag(), a2 = g2_.real(), b2 = g2_.imag();
  const double d = a1 * b2 - b1 * a2;
  return {(b2 * z.real() - a2 * z.imag()) / d, (-b1 * z.real() + a1 * z.imag()) / d};
}

std::string to_string(DerivativeScheme s) {
  return s == DerivativeScheme::Spectral ? "spectral" : "fd4";
}
std::string to_string(Interpolation m) {
  return m == Interpolation::Trigonometric ? "trigonometric" : "bicubic";
}
DerivativeScheme parse_derivative_scheme(const std::string& s) {
  if (s == "fd4") return DerivativeScheme::FiniteDifference4;
  if (s == "spectral") return DerivativeScheme::Spectral;
  throw Error("unknown derivative scheme '" + s + "' (expected fd4 or spectral)");
}
Interpolation parse_interpolation(const std::string& s) {
  if (s == "bicubic") return Interpolation::Bicubic;
  if (s == "trigonometric" || s == "trig") return Interpolation::Trigonometric;
  throw Error("unknown interpolation '" + s + "' (expected bicubic or trigonometric)");
}

Stencil derivative_stencil(DerivativeScheme scheme, int n) {
  Stencil st;
  if (scheme == DerivativeScheme::FiniteDifference4) {
    const double h = 1.0 / n;
    st.offset = {-2, -1, 1, 2};
    st.weight = {1.0 / (12 * h), -8.0 / (12 * h), 8.0 / (12 * h), -1.0 / (12 * h)};
    return st;
  }
  // Derivative of the periodic sinc interpolant at the nodes.
  for (int m = 1; m < n; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    const double x = kPi * m / n;
    const double w = (n % 2 == 0) ? -kPi * sign / std::tan(x) : -kPi * sign / std::sin(x);
    st.offset.push_back(m);
    st.weight.push_back(w);
  }
  return st;
}

Stencil interpolation_weights(Interpolation method, int n, double u) {
  Stencil st;
  u -= std::floor(u / n) * n;  // wrap into [0, n)
  const double fl = std::floor(u);
  const double fr = u - fl;
  const int base = int(fl);
  if (fr < 1e-13 || fr > 1 - 1e-13) {
    st.offset = {fr < 0.5 ? base : base + 1};
    st.weight = {1.0};
    return st;
  }
  if (method == Interpolation::Bicubic) {
    // Four-point Lagrange on nodes -1, 0, 1, 2 relative to the cell start.
    const double x = fr;
    st.offset = {base - 1, base, base + 1, base + 2};
    st.weight = {-x * (x - 1) * (x - 2) / 6.0, (x + 1) * (x - 1) * (x - 2) / 2.0, -(x + 1) * x * (x - 2) / 2.0,
                 (x + 1) * x * (x - 1) / 6.0};
    return st;
  }
  for (int k = 0; k < n; ++k) {
    const double d = (u - k) / n;  // offset in periods
    const double num = std::sin(n * kPi * d);
    const double w = (n % 2 == 0) ? num / (n * std::tan(kPi * d)) : num / (n * std::sin(kPi * d));
    st.offset.push_back(k);
    st.weight.push_back(w);
  }
  return st;
}

std::vector<Plaquette> plaquettes(const TorusLattice& lattice) {
  std::vector<Plaquette> out;
  out.reserve(lattice.sites());
  for (int j = 0; j < lattice.n2(); ++j)
    for (int i = 0; i < lattice.n1(); ++i) out.push_back({i, j});
  return out;
}

// ---------------------------------------------------------------------------
// IO

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() && s.find_first_not_of(" \r", pos) != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(std::string("grid csv: cannot parse ") + what + " '" + s + "'");
  }
}

constexpr char kMagic[4] = {'C', 'M', 'C', 'G'};
constexpr std::uint32_t kBinaryVersion = 1;

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}
template <typename U>
U take(std::istream& is) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) throw Error("grid binary: truncated file");
  return v;
}

}  // namespace

// Layout: two comment lines carrying the lattice, then a header row and one
// row per site: i,j,c0,c1,...
void write_grid_csv(std::ostream& os, const RawGrid& g) {
  const auto& L = g.lattice;
  os << std::setprecision(17);
  os << "# lattice," << L.gamma1().real() << ',' << L.gamma1().imag() << ',' << L.gamma2().real() << ','
     << L.gamma2().imag() << ',' << L.n1() << ',' << L.n2() << '\n';
  os << "# kind," << g.kind << ',' << g.components << ',' << (g.periodic ? 1 : 0) << '\n';
  os << "i,j";
  for (int c = 0; c < g.components; ++c) os << ",c" << c;
  os << '\n';
  for (int j = 0; j < L.n2(); ++j)
    for (int i = 0; i < L.n1(); ++i) {
      os << i << ',' << j;
      const std::size_t k = L.index(i, j);
      for (int c = 0; c < g.components; ++c) os << ',' << g.data[k * g.components + c];
      os << '\n';
    }
}

RawGrid read_grid_csv(std::istream& is) {
  std::string line;
  RawGrid g;
  if (!std::getline(is, line) || line.rfind("# lattice,", 0) != 0) throw Error("grid csv: missing lattice line");
  auto f = split_csv(line);
  if (f.size() != 7) throw Error("grid csv: malformed lattice line");
  const cplx g1(parse_double(f[1], "gamma1"), parse_double(f[2], "gamma1"));
  const cplx g2(parse_double(f[3], "gamma2"), parse_double(f[4], "gamma2"));
  g.lattice = TorusLattice(g1, g2, int(parse_double(f[5], "n1")), int(parse_double(f[6], "n2")));
  if (!std::getline(is, line) || line.rfind("# kind,", 0) != 0) throw Error("grid csv: missing kind line");
  f = split_csv(line);
  if (f.size() != 4) throw Error("grid csv: malformed kind line");
  g.kind = f[1];
  g.components = int(parse_double(f[2], "component count"));
  g.periodic = f[3] == "1";
  if (g.components <= 0 || g.components > 32) throw Error("grid csv: bad component count");
  if (!std::getline(is, line)) throw Error("grid csv: missing header");
  const std::size_t n = g.lattice.sites();
  g.data.assign(n * g.components, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> seen(n, 0);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    f = split_csv(line);
    if (int(f.size()) != g.components + 2) throw Error("grid csv: wrong column count in row " + std::to_string(rows + 1));
    const int i = int(parse_double(f[0], "i")), j = int(parse_double(f[1], "j"));
    if (i < 0 || j < 0 || i >= g.lattice.n1() || j >= g.lattice.n2()) throw Error("grid csv: site index out of range");
    const std::size_t k = g.lattice.index(i, j);
    if (seen[k]) throw Error("grid csv: duplicate site");
    seen[k] = 1;
    for (int c = 0; c < g.components; ++c) g.data[k * g.components + c] = parse_double(f[2 + c], "value");
    ++rows;
  }
  if (rows != n) throw Error("grid csv: expected " + std::to_string(n) + " rows, found " + std::to_string(rows));
  return g;
}

// Layout (little-endian): magic "CMCG", u32 version, f64 gamma1.re, gamma1.im,
// gamma2.re, gamma2.im, u32 n1, n2, u32 components, u8 periodic, u32 kind
// length, kind bytes, then sites*components f64 in site order j*n1 + i.
void write_grid_binary(std::ostream& os, const RawGrid& g) {
  const auto& L = g.lattice;
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kBinaryVersion);
  put<double>(os, L.gamma1().real());
  put<double>(os, L.gamma1().imag());
  put<double>(os, L.gamma2().real());
  put<double>(os, L.gamma2().imag());
  put<std::uint32_t>(os, std::uint32_t(L.n1()));
  put<std::uint32_t>(os, std::uint32_t(L.n2()));
  put<std::uint32_t>(os, std::uint32_t(g.components));
  put<std::uint8_t>(os, g.periodic ? 1 : 0);
  put<std::uint32_t>(os, std::uint32_t(g.kind.size()));
  os.write(g.kind.data(), std::streamsize(g.kind.size()));
  os.write(reinterpret_cast<const char*>(g.data.data()), std::streamsize(g.data.size() * sizeof(double)));
}

RawGrid read_grid_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("grid binary: bad magic");
  if (take<std::uint32_t>(is) != kBinaryVersion) throw Error("grid binary: unsupported version");
  RawGrid g;
  const double a = take<double>(is), b = take<double>(is), c = take<double>(is), d = take<double>(is);
  const int n1 = int(take<std::uint32_t>(is)), n2 = int(take<std::uint32_t>(is));
  g.lattice = TorusLattice({a, b}, {c, d}, n1, n2);
  g.components = int(take<std::uint32_t>(is));
  g.periodic = take<std::uint8_t>(is) != 0;
  const auto len = take<std::uint32_t>(is);
  if (len > 64 || g.components <= 0 || g.components > 32) throw Error("grid binary: corrupt header");
  g.kind.resize(len);
  if (!is.read(g.kind.data(), len)) throw Error("grid binary: truncated file");
  g.data.resize(g.lattice.sites() * g.components);
  if (!is.read(reinterpret_cast<char*>(g.data.data()), std::streamsize(g.data.size() * sizeof(double))))
    throw Error("grid binary: truncated file");
  return g;
}

}  // namespace cmc
