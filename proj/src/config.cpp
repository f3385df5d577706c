#include "rareforce/config.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rareforce {

using nlohmann::json;

double AnsatzSpec::stddev() const {
  if (width_kind == "variance") return std::sqrt(width);
  if (width_kind == "stddev") return width;
  throw std::invalid_argument("ansatz.width_kind must be \"variance\" or \"stddev\"");
}

void RunConfig::validate() const {
  if (potential.kind != "skew_double_well" && potential.kind != "free" && potential.kind != "harmonic") {
    throw std::invalid_argument("potential.kind must be skew_double_well, free or harmonic");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("observable.sigma must be nonnegative");
  if (!(set_lo < set_hi)) throw std::invalid_argument("stopping_set needs lo < hi");
  if (!(domain_lo < set_lo && set_hi < domain_hi)) {
    throw std::invalid_argument("stopping_set must lie strictly inside the domain");
  }
  if (boundary != "reflect" && boundary != "abort") throw std::invalid_argument("domain.boundary must be reflect or abort");
  if (x0 && !(*x0 > set_hi && *x0 <= domain_hi)) {
    throw std::invalid_argument("x0 must lie right of the stopping set and inside the domain");
  }
  sim.validate();
  descent.validate();
  if (ansatz.m == 0) throw std::invalid_argument("ansatz.m must be positive");
  if (!(ansatz.width > 0.0)) throw std::invalid_argument("ansatz.width must be positive");
  (void)ansatz.stddev();
  if (ansatz.placement != "uniform") throw std::invalid_argument("ansatz.placement must be \"uniform\"");
  if (ansatz.init != "fill_wells" && ansatz.init != "zero") throw std::invalid_argument("ansatz.init must be fill_wells or zero");
  if (ladder.shells == 0) throw std::invalid_argument("ladder.shells must be positive");
  if (estimate.paths < 2) throw std::invalid_argument("estimate.paths must be at least 2");
  if (estimate.control != "ansatz" && estimate.control != "none") {
    throw std::invalid_argument("estimate.control must be \"ansatz\" or \"none\"");
  }
  if (!(reference.dx > 0.0)) throw std::invalid_argument("reference.dx must be positive");
  if (!(gradcheck.fd_step > 0.0 && gradcheck.horizon > 0.0)) throw std::invalid_argument("gradcheck step and horizon must be positive");
  if (gradcheck.batch_size < 2) throw std::invalid_argument("gradcheck.batch_size must be at least 2");
}

json to_json(const RunConfig& c) {
  json j;
  j["potential"] = {{"kind", c.potential.kind},
                    {"tilt", c.potential.tilt},
                    {"stiffness", c.potential.stiffness},
                    {"center", c.potential.center}};
  j["observable"] = {{"sigma", c.sigma}};
  j["stopping_set"] = {{"lo", c.set_lo}, {"hi", c.set_hi}};
  j["domain"] = {{"lo", c.domain_lo}, {"hi", c.domain_hi}, {"boundary", c.boundary}};
  j["x0"] = c.x0 ? json(*c.x0) : json("auto");
  j["epsilon"] = c.sim.epsilon;
  j["h"] = c.sim.h;
  j["max_steps"] = c.sim.max_steps;
  j["seed"] = c.sim.seed;
  j["workers"] = c.sim.workers;
  j["ansatz"] = {{"m", c.ansatz.m},
                 {"width", c.ansatz.width},
                 {"width_kind", c.ansatz.width_kind},
                 {"placement", c.ansatz.placement},
                 {"init", c.ansatz.init}};
  j["descent"] = {{"max_iters", c.descent.max_iters},
                  {"grad_tol", c.descent.grad_tol},
                  {"wolfe_c1", c.descent.wolfe_c1},
                  {"wolfe_c2", c.descent.wolfe_c2},
                  {"alpha_init", c.descent.alpha_init},
                  {"alpha_max", c.descent.alpha_max},
                  {"max_step_norm", c.descent.max_step_norm},
                  {"batch_size", c.descent.batch_size},
                  {"max_batch_size", c.descent.max_batch_size},
                  {"reseed_policy", c.descent.reseed_policy == ReseedPolicy::fixed ? "fixed" : "fresh"}};
  j["ladder"] = {{"shells", c.ladder.shells}, {"thresholds", c.ladder.thresholds}};
  j["estimate"] = {{"paths", c.estimate.paths}, {"control", c.estimate.control}};
  j["reference"] = {{"dx", c.reference.dx}, {"probes", c.reference.probes}};
  j["gradcheck"] = {{"horizon", c.gradcheck.horizon},
                    {"fd_step", c.gradcheck.fd_step},
                    {"vectors", c.gradcheck.vectors},
                    {"batch_size", c.gradcheck.batch_size},
                    {"coefficient_scale", c.gradcheck.coefficient_scale}};
  j["compare"] = {{"discretization_allowance", c.compare.discretization_allowance}};
  j["output_dir"] = c.output_dir;
  return j;
}

std::vector<std::string> unknown_keys(const json& doc, const json& schema) {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const json& d, const json& s, const std::string& prefix) -> void {
    if (!d.is_object()) return;
    for (auto it = d.begin(); it != d.end(); ++it) {
      const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (!s.is_object() || !s.contains(it.key())) {
        out.push_back(path);
      } else if (s.at(it.key()).is_object()) {
        self(self, it.value(), s.at(it.key()), path);
      }
    }
  };
  walk(walk, doc, schema, "");
  return out;
}

namespace {

template <class T>
void read(const json& doc, const std::string& path, T& out) {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    node = &node->at(key);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    out = node->get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("config key {}: {}", path, e.what()));
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig c;
  json merged = to_json(c);
  const auto unknown = unknown_keys(j, merged);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown config keys: " + list);
  }
  merged.merge_patch(j);

  read(merged, "potential.kind", c.potential.kind);
  read(merged, "potential.tilt", c.potential.tilt);
  read(merged, "potential.stiffness", c.potential.stiffness);
  read(merged, "potential.center", c.potential.center);
  read(merged, "observable.sigma", c.sigma);
  read(merged, "stopping_set.lo", c.set_lo);
  read(merged, "stopping_set.hi", c.set_hi);
  read(merged, "domain.lo", c.domain_lo);
  read(merged, "domain.hi", c.domain_hi);
  read(merged, "domain.boundary", c.boundary);
  if (merged.contains("x0")) {
    const json& x0 = merged.at("x0");
    if (x0.is_number()) {
      c.x0 = x0.get<double>();
    } else if (!(x0.is_string() && x0.get<std::string>() == "auto")) {
      throw std::invalid_argument("config key x0: expected a number or \"auto\"");
    }
  }
  read(merged, "epsilon", c.sim.epsilon);
  read(merged, "h", c.sim.h);
  read(merged, "max_steps", c.sim.max_steps);
  read(merged, "seed", c.sim.seed);
  read(merged, "workers", c.sim.workers);
  c.descent.seed = c.sim.seed;
  read(merged, "ansatz.m", c.ansatz.m);
  read(merged, "ansatz.width", c.ansatz.width);
  read(merged, "ansatz.width_kind", c.ansatz.width_kind);
  read(merged, "ansatz.placement", c.ansatz.placement);
  read(merged, "ansatz.init", c.ansatz.init);
  read(merged, "descent.max_iters", c.descent.max_iters);
  read(merged, "descent.grad_tol", c.descent.grad_tol);
  read(merged, "descent.wolfe_c1", c.descent.wolfe_c1);
  read(merged, "descent.wolfe_c2", c.descent.wolfe_c2);
  read(merged, "descent.alpha_init", c.descent.alpha_init);
  read(merged, "descent.alpha_max", c.descent.alpha_max);
  read(merged, "descent.max_step_norm", c.descent.max_step_norm);
  read(merged, "descent.batch_size", c.descent.batch_size);
  read(merged, "descent.max_batch_size", c.descent.max_batch_size);
  std::string policy;
  read(merged, "descent.reseed_policy", policy);
  if (policy == "fresh") {
    c.descent.reseed_policy = ReseedPolicy::fresh_per_iteration;
  } else if (policy == "fixed") {
    c.descent.reseed_policy = ReseedPolicy::fixed;
  } else {
    throw std::invalid_argument("descent.reseed_policy must be \"fresh\" or \"fixed\"");
  }
  c.sim.batch_size = c.descent.batch_size;
  read(merged, "ladder.shells", c.ladder.shells);
  read(merged, "ladder.thresholds", c.ladder.thresholds);
  read(merged, "estimate.paths", c.estimate.paths);
  read(merged, "estimate.control", c.estimate.control);
  read(merged, "reference.dx", c.reference.dx);
  read(merged, "reference.probes", c.reference.probes);
  read(merged, "gradcheck.horizon", c.gradcheck.horizon);
  read(merged, "gradcheck.fd_step", c.gradcheck.fd_step);
  read(merged, "gradcheck.vectors", c.gradcheck.vectors);
  read(merged, "gradcheck.batch_size", c.gradcheck.batch_size);
  read(merged, "gradcheck.coefficient_scale", c.gradcheck.coefficient_scale);
  read(merged, "compare.discretization_allowance", c.compare.discretization_allowance);
  read(merged, "output_dir", c.output_dir);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(fmt::format("{}: {}", path, e.what()));
  }
  return config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("malformed override key: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("workers");
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace rareforce
