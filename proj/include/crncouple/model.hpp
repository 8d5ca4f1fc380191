#pragma once

// Reaction networks with mass-action intensities.
//
// Mass action here is c * x(x-1)...(x-nu+1) per reactant species, i.e. the
// falling factorial WITHOUT division by nu!.  A dimerization 2A -> 0 with
// constant c therefore has intensity c*x*(x-1), not c*x*(x-1)/2.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crncouple/streams.hpp"

namespace crncouple {

using Count = std::int64_t;

struct State {
  std::vector<Count> counts;

  std::size_t dim() const noexcept { return counts.size(); }
  Count operator[](std::size_t i) const { return counts[i]; }
  Count& operator[](std::size_t i) { return counts[i]; }

  friend bool operator==(const State&, const State&) = default;
};

struct ReactionChannel {
  std::string id;
  std::vector<Count> reactants;   // nu_k, per species
  std::vector<Count> products;
  std::vector<Count> net_change;  // products - reactants
  double rate_constant = 0.0;

  bool is_noop() const {
    for (Count c : net_change)
      if (c != 0) return false;
    return true;
  }

  // Sum of reactant multiplicities; <= 1 means the intensity is affine.
  Count order() const {
    Count s = 0;
    for (Count c : reactants) s += c;
    return s;
  }

  friend bool operator==(const ReactionChannel&, const ReactionChannel&) = default;
};

struct InitialCondition {
  enum class Kind { fixed, poisson } kind = Kind::fixed;
  Count count = 0;
  double mean = 0.0;

  static InitialCondition fixed_at(Count n) { return {Kind::fixed, n, 0.0}; }
  static InitialCondition poisson_with(double mu) { return {Kind::poisson, 0, mu}; }

  friend bool operator==(const InitialCondition&, const InitialCondition&) = default;
};

enum class InitCoupling { shared, independent };

struct Network {
  std::vector<std::string> species;
  std::vector<ReactionChannel> channels;
  std::vector<InitialCondition> init;
  InitCoupling init_coupling = InitCoupling::shared;

  std::size_t dim() const noexcept { return species.size(); }
  std::size_t num_channels() const noexcept { return channels.size(); }

  std::optional<std::size_t> species_index(std::string_view name) const {
    for (std::size_t i = 0; i < species.size(); ++i)
      if (species[i] == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> channel_index(std::string_view id) const {
    for (std::size_t k = 0; k < channels.size(); ++k)
      if (channels[k].id == id) return k;
    return std::nullopt;
  }

  friend bool operator==(const Network&, const Network&) = default;
};

struct Perturbation {
  std::string channel_id;
  double rate_x = 0.0;
  double rate_z = 0.0;
};

struct Diagnostic {
  int line = 0;  // 1-based; 0 when not tied to a line
  std::string message;
};

inline std::string format_diagnostic(const Diagnostic& d) {
  if (d.line > 0) return "line " + std::to_string(d.line) + ": " + d.message;
  return d.message;
}

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(std::vector<Diagnostic> diags)
      : std::runtime_error(join(diags)), diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string join(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      out += format_diagnostic(d);
    }
    return out;
  }
  std::vector<Diagnostic> diagnostics_;
};

// ---------------------------------------------------------------------------
// Intensities

inline double intensity(const ReactionChannel& channel, std::span<const Count> x) {
  double value = channel.rate_constant;
  for (std::size_t i = 0; i < channel.reactants.size(); ++i) {
    const Count nu = channel.reactants[i];
    if (nu == 0) continue;
    if (x[i] < nu) return 0.0;
    for (Count j = 0; j < nu; ++j) value *= static_cast<double>(x[i] - j);
  }
  return value;
}

inline double intensity(const ReactionChannel& channel, const State& x) {
  return intensity(channel, std::span<const Count>(x.counts));
}

inline double total_intensity(const Network& net, const State& x) {
  double sum = 0.0;
  for (const auto& ch : net.channels) sum += intensity(ch, x);
  return sum;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_name(std::string_view s) {
  if (s.empty()) return false;
  const auto c0 = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(c0) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

inline std::optional<Count> parse_count(std::string_view s) {
  if (s.empty()) return std::nullopt;
  Count v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    if (v > (std::numeric_limits<Count>::max() - 9) / 10) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Term {
  Count multiplicity;
  std::string name;
};

// complex := "0" | term ("+" term)* ; term := [INT] NAME
inline std::optional<std::vector<Term>> parse_complex(const std::vector<std::string>& toks,
                                                      std::string& err) {
  if (toks.empty()) {
    err = "empty complex";
    return std::nullopt;
  }
  if (toks.size() == 1 && toks[0] == "0") return std::vector<Term>{};
  std::vector<Term> terms;
  std::size_t i = 0;
  while (true) {
    if (i >= toks.size()) {
      err = "expected term";
      return std::nullopt;
    }
    Count mult = 1;
    std::string name;
    if (auto n = parse_count(toks[i])) {
      mult = *n;
      ++i;
      if (i >= toks.size() || !is_name(toks[i])) {
        err = "expected species name after multiplicity '" + toks[i - 1] + "'";
        return std::nullopt;
      }
      name = toks[i++];
    } else {
      // fused form "2A"
      std::size_t d = 0;
      while (d < toks[i].size() && std::isdigit(static_cast<unsigned char>(toks[i][d]))) ++d;
      const std::string_view tail = std::string_view(toks[i]).substr(d);
      if (!is_name(tail)) {
        err = "malformed term '" + toks[i] + "'";
        return std::nullopt;
      }
      if (d > 0) {
        auto n = parse_count(std::string_view(toks[i]).substr(0, d));
        if (!n) {
          err = "malformed multiplicity in '" + toks[i] + "'";
          return std::nullopt;
        }
        mult = *n;
      }
      name = std::string(tail);
      ++i;
    }
    terms.push_back({mult, std::move(name)});
    if (i == toks.size()) break;
    if (toks[i] != "+") {
      err = "expected '+' or '->' but found '" + toks[i] + "'";
      return std::nullopt;
    }
    ++i;
  }
  return terms;
}

// Splits "a+b" style tokens so that '+' and '->' are always separate.
inline std::vector<std::string> tokenize_reaction(std::string_view s) {
  std::string spaced;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '-' && i + 1 < s.size() && s[i + 1] == '>') {
      spaced += " -> ";
      ++i;
    } else if (s[i] == '+' || s[i] == ':') {
      spaced += ' ';
      spaced += s[i];
      spaced += ' ';
    } else {
      spaced += s[i];
    }
  }
  return split_ws(spaced);
}

}  // namespace detail

// Parses the line-oriented network grammar.  Throws ParseError carrying every
// diagnostic found, each tagged with its 1-based line number.
inline Network parse_network(std::string_view text) {
  Network net;
  std::vector<Diagnostic> diags;
  std::vector<std::pair<int, std::vector<std::string>>> init_lines;
  std::vector<std::pair<int, std::string>> reaction_lines;

  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const std::string& kw = toks[0];
    if (kw == "species") {
      if (toks.size() < 2) {
        diags.push_back({lineno, "species declaration lists no names"});
        continue;
      }
      for (std::size_t i = 1; i < toks.size(); ++i) {
        if (!detail::is_name(toks[i])) {
          diags.push_back({lineno, "invalid species name '" + toks[i] + "'"});
        } else if (net.species_index(toks[i])) {
          diags.push_back({lineno, "duplicate species '" + toks[i] + "'"});
        } else {
          net.species.push_back(toks[i]);
        }
      }
    } else if (kw == "init") {
      init_lines.emplace_back(lineno, toks);
    } else if (kw == "reaction") {
      const std::size_t start = line.find("reaction") + std::string_view("reaction").size();
      reaction_lines.emplace_back(lineno, std::string(line.substr(start)));
    } else {
      diags.push_back({lineno, "unknown directive '" + kw + "'"});
    }
  }

  if (net.species.empty()) diags.push_back({0, "no species declared"});
  net.init.assign(net.species.size(), InitialCondition::fixed_at(0));

  for (const auto& [ln, toks] : init_lines) {
    if (toks.size() != 3) {
      diags.push_back({ln, "init expects: init NAME (INT | poisson(FLOAT))"});
      continue;
    }
    const auto idx = net.species_index(toks[1]);
    if (!idx) {
      diags.push_back({ln, "unknown species '" + toks[1] + "' in init"});
      continue;
    }
    const std::string& v = toks[2];
    if (v.rfind("poisson(", 0) == 0 && v.back() == ')') {
      const auto mu = detail::parse_real(std::string_view(v).substr(8, v.size() - 9));
      if (!mu || *mu < 0.0) {
        diags.push_back({ln, "invalid poisson mean in '" + v + "'"});
        continue;
      }
      net.init[*idx] = InitialCondition::poisson_with(*mu);
    } else if (auto n = detail::parse_count(v)) {
      net.init[*idx] = InitialCondition::fixed_at(*n);
    } else {
      diags.push_back({ln, "invalid initial count '" + v + "'"});
    }
  }

  for (const auto& [ln, body] : reaction_lines) {
    const auto toks = detail::tokenize_reaction(body);
    // NAME ":" lhs "->" rhs "rate" FLOAT
    if (toks.size() < 2 || !detail::is_name(toks[0]) || toks[1] != ":") {
      diags.push_back({ln, "reaction expects: reaction NAME: complex -> complex rate FLOAT"});
      continue;
    }
    const auto arrow = std::find(toks.begin() + 2, toks.end(), "->");
    const auto rate_kw = std::find(toks.begin() + 2, toks.end(), "rate");
    if (arrow == toks.end() || rate_kw == toks.end() || rate_kw < arrow || rate_kw + 2 != toks.end()) {
      diags.push_back({ln, "reaction expects: reaction NAME: complex -> complex rate FLOAT"});
      continue;
    }
    ReactionChannel ch;
    ch.id = toks[0];
    if (net.channel_index(ch.id)) {
      diags.push_back({ln, "duplicate reaction id '" + ch.id + "'"});
      continue;
    }
    const std::vector<std::string> lhs(toks.begin() + 2, arrow);
    const std::vector<std::string> rhs(arrow + 1, rate_kw);
    std::string err;
    const auto lterms = detail::parse_complex(lhs, err);
    if (!lterms) {
      diags.push_back({ln, "reactants: " + err});
      continue;
    }
    const auto rterms = detail::parse_complex(rhs, err);
    if (!rterms) {
      diags.push_back({ln, "products: " + err});
      continue;
    }
    const auto rate = detail::parse_real(*(rate_kw + 1));
    if (!rate) {
      diags.push_back({ln, "invalid rate '" + *(rate_kw + 1) + "'"});
      continue;
    }
    if (*rate < 0.0) {
      diags.push_back({ln, "negative rate " + *(rate_kw + 1)});
      continue;
    }
    ch.rate_constant = *rate;
    ch.reactants.assign(net.species.size(), 0);
    ch.products.assign(net.species.size(), 0);
    bool ok = true;
    auto fill = [&](const std::vector<detail::Term>& terms, std::vector<Count>& into) {
      for (const auto& t : terms) {
        const auto idx = net.species_index(t.name);
        if (!idx) {
          diags.push_back({ln, "unknown species '" + t.name + "' in reaction " + ch.id});
          ok = false;
          continue;
        }
        into[*idx] += t.multiplicity;
      }
    };
    fill(*lterms, ch.reactants);
    fill(*rterms, ch.products);
    if (!ok) continue;
    ch.net_change.resize(net.species.size());
    for (std::size_t i = 0; i < net.species.size(); ++i)
      ch.net_change[i] = ch.products[i] - ch.reactants[i];
    net.channels.push_back(std::move(ch));
  }

  if (net.channels.empty() && diags.empty()) diags.push_back({0, "no reactions declared"});
  if (!diags.empty()) throw ParseError(std::move(diags));
  return net;
}

inline std::vector<std::string> validation_warnings(const Network& net) {
  std::vector<std::string> out;
  for (const auto& ch : net.channels)
    if (ch.is_noop()) out.push_back("reaction " + ch.id + " has zero net change");
  return out;
}

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string format_complex(const Network& net, const std::vector<Count>& mult) {
  std::string out;
  for (std::size_t i = 0; i < mult.size(); ++i) {
    if (mult[i] == 0) continue;
    if (!out.empty()) out += " + ";
    if (mult[i] != 1) out += std::to_string(mult[i]) + " ";
    out += net.species[i];
  }
  return out.empty() ? "0" : out;
}

}  // namespace detail

// Canonical text form; parse_network(serialize_network(n)) == n.
inline std::string serialize_network(const Network& net) {
  std::string out = "species";
  for (const auto& s : net.species) out += " " + s;
  out += '\n';
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const auto& ic = net.init[i];
    out += "init " + net.species[i] + " ";
    if (ic.kind == InitialCondition::Kind::poisson)
      out += "poisson(" + detail::format_real(ic.mean) + ")";
    else
      out += std::to_string(ic.count);
    out += '\n';
  }
  for (const auto& ch : net.channels) {
    out += "reaction " + ch.id + ": " + detail::format_complex(net, ch.reactants) + " -> " +
           detail::format_complex(net, ch.products) + " rate " + detail::format_real(ch.rate_constant) +
           '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation and initial conditions

inline std::pair<Network, Network> apply_perturbation(const Network& net, const Perturbation& p) {
  const auto k = net.channel_index(p.channel_id);
  if (!k) throw std::invalid_argument("unknown reaction id '" + p.channel_id + "'");
  if (!(p.rate_x >= 0.0) || !(p.rate_z >= 0.0))
    throw std::invalid_argument("perturbed rates must be nonnegative");
  std::pair<Network, Network> out{net, net};
  out.first.channels[*k].rate_constant = p.rate_x;
  out.second.channels[*k].rate_constant = p.rate_z;
  return out;
}

// True when both networks have identical species and stoichiometry.
inline bool same_structure(const Network& a, const Network& b) {
  if (a.species != b.species || a.channels.size() != b.channels.size()) return false;
  for (std::size_t k = 0; k < a.channels.size(); ++k)
    if (a.channels[k].net_change != b.channels[k].net_change) return false;
  return true;
}

// Poisson variate by inversion of a single uniform.
inline Count poisson_from_uniform(double mean, double u) {
  if (mean <= 0.0) return 0;
  if (mean > 700.0) {
    // exp(-mean) underflows; start the CDF walk at the mode instead of 0.
    const double logp0 = -mean + static_cast<double>(static_cast<Count>(mean)) * std::log(mean) -
                         std::lgamma(static_cast<double>(static_cast<Count>(mean)) + 1.0);
    Count mode = static_cast<Count>(mean);
    // CDF at mode by summing downwards until negligible.
    double pm = std::exp(logp0);
    double cdf_mode = 0.0;
    {
      double p = pm;
      for (Count j = mode; j >= 0 && p > 1e-300; --j) {
        cdf_mode += p;
        p *= static_cast<double>(j) / mean;
      }
    }
    if (u < cdf_mode) {
      double cdf = cdf_mode, p = pm;
      Count j = mode;
      while (j > 0) {
        cdf -= p;
        if (u >= cdf) return j;
        p *= static_cast<double>(j) / mean;
        --j;
      }
      return 0;
    }
    double cdf = cdf_mode, p = pm;
    Count j = mode;
    while (u >= cdf && p > 0.0) {
      ++j;
      p *= mean / static_cast<double>(j);
      cdf += p;
    }
    return j;
  }
  double p = std::exp(-mean);
  double cdf = p;
  Count j = 0;
  while (u >= cdf) {
    ++j;
    p *= mean / static_cast<double>(j);
    cdf += p;
    if (p == 0.0 && j > mean) break;  // rounding left cdf just below u
  }
  return j;
}

inline State draw_initial(const Network& net, UniformStream& stream) {
  State s;
  s.counts.resize(net.dim());
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const auto& ic = net.init[i];
    s.counts[i] = ic.kind == InitialCondition::Kind::fixed ? ic.count
                                                           : poisson_from_uniform(ic.mean, stream.uniform_at(i));
  }
  return s;
}

// Shared mode draws once and duplicates; independent mode uses two streams.
// Streams are keyed (role=init, channel=0 for X, 1 for Z).
inline std::pair<State, State> sample_initial(const Network& net, InitCoupling mode,
                                              std::uint64_t master_seed, std::uint32_t path_index) {
  UniformStream sx(StreamKey{master_seed, path_index, StreamRole::init, 0, 0});
  State x = draw_initial(net, sx);
  if (mode == InitCoupling::shared) return {x, x};
  UniformStream sz(StreamKey{master_seed, path_index, StreamRole::init, 1, 0});
  return {std::move(x), draw_initial(net, sz)};
}

}  // namespace crncouple
