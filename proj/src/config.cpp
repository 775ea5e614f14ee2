#include "cble/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "cble/errors.hpp"

namespace cble {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct RawEntry {
    std::string value;
    int line = 0;
};

struct RawConfig {
    std::map<std::string, RawEntry> entries;  // "section.key" -> value
    std::vector<config_issue> issues;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

RawConfig tokenize(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                raw.issues.push_back({lineno, line, "malformed section header"});
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            raw.issues.push_back({lineno, line, "expected key = value"});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            raw.issues.push_back({lineno, key, "key outside any [section]"});
            continue;
        }
        const std::string full = section + "." + key;
        auto it = raw.entries.find(full);
        if (it != raw.entries.end()) {
            raw.issues.push_back({lineno, full,
                                  "duplicate key (first defined on line " +
                                      std::to_string(it->second.line) + ")"});
            continue;
        }
        raw.entries[full] = {value, lineno};
    }
    return raw;
}

class Reader {
public:
    Reader(RawConfig& raw) : raw_(raw) {}

    bool has(const std::string& key) const { return raw_.entries.count(key) > 0; }

    template <class F>
    void with(const std::string& key, const F& f) {
        auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) return;
        consumed_.push_back(key);
        try {
            f(it->second.value);
        } catch (const std::exception& e) {
            raw_.issues.push_back({it->second.line, key, e.what()});
        }
    }

    double number(const std::string& s) const {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
        return v;
    }

    long integer(const std::string& s) const {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
        return v;
    }

    std::vector<double> numbers(const std::string& s) const {
        std::vector<double> out;
        std::istringstream in(s);
        std::string tok;
        while (in >> tok) out.push_back(number(tok));
        return out;
    }

    void finish() {
        for (const auto& [key, entry] : raw_.entries)
            if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
                raw_.issues.push_back({entry.line, key, "unknown key"});
    }

private:
    RawConfig& raw_;
    std::vector<std::string> consumed_;
};

}  // namespace

std::vector<double> parse_range(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw std::invalid_argument("range must be a:b:step");
    const double a = std::stod(text.substr(0, c1));
    const double b = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (!(step > 0.0) || b < a) throw std::invalid_argument("range must have step > 0 and b >= a");
    std::vector<double> out;
    for (double v = a; v <= b + 1e-9 * step; v += step) out.push_back(v);
    return out;
}

ExperimentConfig ExperimentConfig::benchmark() {
    ExperimentConfig c;
    c.env = LevyEnvSpec::brownian(-0.5, 1.0);
    c.mech = BranchingMechanism::stable(1.0, 0.5);
    c.t_grid = {10, 20, 30, 40, 50, 60, 70, 80};
    c.x_grid = {0.5, 1.0, 1.5, 2.0, 2.5};
    return c;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
    auto spec_eq = [](const LevyEnvSpec& a, const LevyEnvSpec& b) {
        if (a.drift != b.drift || a.sigma != b.sigma || a.jump_rate != b.jump_rate ||
            a.jump_kind != b.jump_kind)
            return false;
        if (a.jump_kind == JumpKind::two_sided_exp &&
            (a.p_up != b.p_up || a.eta_up != b.eta_up || a.eta_down != b.eta_down))
            return false;
        if (a.jump_kind == JumpKind::atoms) {
            if (a.atoms.size() != b.atoms.size()) return false;
            for (std::size_t i = 0; i < a.atoms.size(); ++i)
                if (a.atoms[i].value != b.atoms[i].value || a.atoms[i].prob != b.atoms[i].prob)
                    return false;
        }
        return true;
    };
    auto mech_eq = [](const BranchingMechanism& a, const BranchingMechanism& b) {
        if (a.kind != b.kind || a.psi_prime0 != b.psi_prime0) return false;
        if (a.kind == MechKind::stable)
            return a.stable_c == b.stable_c && a.stable_beta == b.stable_beta;
        if (a.rho2 != b.rho2 || a.atoms.size() != b.atoms.size()) return false;
        for (std::size_t i = 0; i < a.atoms.size(); ++i)
            if (a.atoms[i].size != b.atoms[i].size || a.atoms[i].mass != b.atoms[i].mass)
                return false;
        return true;
    };
    return spec_eq(env, o.env) && mech_eq(mech, o.mech) && x0 == o.x0 && z == o.z && x == o.x &&
           t == o.t && t_grid == o.t_grid && x_grid == o.x_grid && n_paths == o.n_paths &&
           seed == o.seed && threads == o.threads && max_step == o.max_step && dt == o.dt &&
           ode_tol == o.ode_tol && eps_sign == o.eps_sign && gamma_tol == o.gamma_tol &&
           renewal_h == o.renewal_h && t_lad == o.t_lad && out_dir == o.out_dir;
}

ExperimentConfig parse_config(const std::string& text) {
    RawConfig raw = tokenize(text);
    Reader r(raw);
    ExperimentConfig cfg = ExperimentConfig::benchmark();

    // [environment]
    LevyEnvSpec env;
    std::string jump_kind = "none";
    std::vector<double> jump_params;
    r.with("environment.drift", [&](const std::string& v) { env.drift = r.number(v); });
    r.with("environment.sigma", [&](const std::string& v) {
        const double s = r.number(v);
        if (s < 0.0) throw std::invalid_argument("sigma must be >= 0");
        env.sigma = s;
    });
    r.with("environment.jump_rate", [&](const std::string& v) {
        const double rate = r.number(v);
        if (rate < 0.0) throw std::invalid_argument("jump_rate must be >= 0");
        env.jump_rate = rate;
    });
    r.with("environment.jump_kind", [&](const std::string& v) {
        if (v != "none" && v != "two_sided_exp" && v != "atoms")
            throw std::invalid_argument("jump_kind must be none|two_sided_exp|atoms");
        jump_kind = v;
    });
    r.with("environment.jump_params",
           [&](const std::string& v) { jump_params = r.numbers(v); });
    r.with("environment.x0", [&](const std::string& v) { cfg.x0 = r.number(v); });
    try {
        if (jump_kind == "none") {
            env.jump_kind = JumpKind::none;
            if (env.jump_rate > 0.0)
                throw std::invalid_argument("jump_rate > 0 requires jump_kind != none");
        } else if (jump_kind == "two_sided_exp") {
            if (jump_params.size() != 3)
                throw std::invalid_argument("two_sided_exp needs jump_params = p_up eta_up eta_down");
            env.jump_kind = JumpKind::two_sided_exp;
            env.p_up = jump_params[0];
            env.eta_up = jump_params[1];
            env.eta_down = jump_params[2];
        } else {
            if (jump_params.size() < 2 || jump_params.size() % 2 != 0)
                throw std::invalid_argument("atoms need jump_params = value prob pairs");
            env.jump_kind = JumpKind::atoms;
            env.atoms.clear();
            for (std::size_t i = 0; i < jump_params.size(); i += 2)
                env.atoms.push_back({jump_params[i], jump_params[i + 1]});
        }
        env.validate();
        cfg.env = env;
    } catch (const std::exception& e) {
        raw.issues.push_back({0, "environment", e.what()});
    }

    // [branching]
    std::string bkind = "";
    double bc = 1.0, bbeta = 0.5, brho2 = 0.0, psi_prime0 = 0.0;
    bool rho2_set = false;
    std::vector<double> batoms;
    r.with("branching.kind", [&](const std::string& v) {
        if (v != "stable" && v != "diffusive" && v != "atoms")
            throw std::invalid_argument("kind must be stable|diffusive|atoms");
        bkind = v;
    });
    r.with("branching.C", [&](const std::string& v) { bc = r.number(v); });
    r.with("branching.beta", [&](const std::string& v) { bbeta = r.number(v); });
    r.with("branching.rho2", [&](const std::string& v) {
        brho2 = r.number(v);
        rho2_set = true;
    });
    r.with("branching.atoms", [&](const std::string& v) { batoms = r.numbers(v); });
    r.with("branching.psi_prime0", [&](const std::string& v) { psi_prime0 = r.number(v); });
    if (!bkind.empty()) {
        try {
            if (bkind == "stable") {
                cfg.mech = BranchingMechanism::stable(bc, bbeta);
            } else if (bkind == "diffusive") {
                if (!rho2_set) throw std::invalid_argument("diffusive kind needs rho2");
                cfg.mech = BranchingMechanism::diffusive(brho2);
            } else {
                if (batoms.size() % 2 != 0)
                    throw std::invalid_argument("atoms need size mass pairs");
                std::vector<BranchAtom> list;
                for (std::size_t i = 0; i < batoms.size(); i += 2)
                    list.push_back({batoms[i], batoms[i + 1]});
                cfg.mech = BranchingMechanism::finite_atoms(brho2, list);
            }
            cfg.mech.psi_prime0 = psi_prime0;
        } catch (const std::exception& e) {
            raw.issues.push_back({0, "branching", e.what()});
        }
    }

    // [run]
    r.with("run.z", [&](const std::string& v) {
        cfg.z = r.number(v);
        if (cfg.z < 0.0) throw std::invalid_argument("z must be >= 0");
    });
    r.with("run.x", [&](const std::string& v) { cfg.x = r.number(v); });
    r.with("run.t", [&](const std::string& v) {
        cfg.t = r.number(v);
        if (!(cfg.t > 0.0)) throw std::invalid_argument("t must be > 0");
    });
    r.with("run.t_grid", [&](const std::string& v) { cfg.t_grid = parse_range(v); });
    r.with("run.x_grid", [&](const std::string& v) { cfg.x_grid = parse_range(v); });
    r.with("run.n_paths", [&](const std::string& v) {
        cfg.n_paths = r.integer(v);
        if (cfg.n_paths <= 0) throw std::invalid_argument("n_paths must be > 0");
    });
    r.with("run.seed",
           [&](const std::string& v) { cfg.seed = static_cast<std::uint64_t>(r.integer(v)); });
    r.with("run.threads", [&](const std::string& v) {
        cfg.threads = static_cast<int>(r.integer(v));
        if (cfg.threads <= 0) throw std::invalid_argument("threads must be > 0");
    });
    r.with("run.max_step", [&](const std::string& v) {
        cfg.max_step = r.number(v);
        if (!(cfg.max_step > 0.0)) throw std::invalid_argument("max_step must be > 0");
    });
    r.with("run.dt", [&](const std::string& v) {
        cfg.dt = r.number(v);
        if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    });
    r.with("run.ode_tol", [&](const std::string& v) {
        cfg.ode_tol = r.number(v);
        if (!(cfg.ode_tol > 0.0)) throw std::invalid_argument("ode_tol must be > 0");
    });
    r.with("run.eps_sign", [&](const std::string& v) { cfg.eps_sign = r.number(v); });
    r.with("run.gamma_tol", [&](const std::string& v) { cfg.gamma_tol = r.number(v); });
    r.with("run.renewal_h", [&](const std::string& v) {
        cfg.renewal_h = r.number(v);
        if (!(cfg.renewal_h > 0.0)) throw std::invalid_argument("renewal_h must be > 0");
    });
    r.with("run.t_lad", [&](const std::string& v) {
        cfg.t_lad = r.number(v);
        if (!(cfg.t_lad > 0.0)) throw std::invalid_argument("t_lad must be > 0");
    });

    // [output]
    r.with("output.dir", [&](const std::string& v) { cfg.out_dir = v; });

    r.finish();
    if (!raw.issues.empty()) {
        std::ostringstream msg;
        msg << "config has " << raw.issues.size() << " problem(s):";
        for (const auto& is : raw.issues)
            msg << "\n  line " << is.line << ", " << is.key << ": " << is.reason;
        throw config_error(msg.str(), raw.issues);
    }
    return cfg;
}

std::string emit_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[environment]\n";
    out << "drift = " << fmt_double(cfg.env.drift) << "\n";
    out << "sigma = " << fmt_double(cfg.env.sigma) << "\n";
    out << "jump_rate = " << fmt_double(cfg.env.jump_rate) << "\n";
    switch (cfg.env.jump_kind) {
        case JumpKind::none:
            out << "jump_kind = none\n";
            break;
        case JumpKind::two_sided_exp:
            out << "jump_kind = two_sided_exp\n";
            out << "jump_params = " << fmt_double(cfg.env.p_up) << " " << fmt_double(cfg.env.eta_up)
                << " " << fmt_double(cfg.env.eta_down) << "\n";
            break;
        case JumpKind::atoms: {
            out << "jump_kind = atoms\n";
            out << "jump_params =";
            for (const auto& a : cfg.env.atoms)
                out << " " << fmt_double(a.value) << " " << fmt_double(a.prob);
            out << "\n";
            break;
        }
    }
    out << "x0 = " << fmt_double(cfg.x0) << "\n\n";

    out << "[branching]\n";
    if (cfg.mech.kind == MechKind::stable) {
        out << "kind = stable\n";
        out << "C = " << fmt_double(cfg.mech.stable_c) << "\n";
        out << "beta = " << fmt_double(cfg.mech.stable_beta) << "\n";
    } else {
        out << "kind = atoms\n";
        out << "rho2 = " << fmt_double(cfg.mech.rho2) << "\n";
        out << "atoms =";
        for (const auto& a : cfg.mech.atoms)
            out << " " << fmt_double(a.size) << " " << fmt_double(a.mass);
        out << "\n";
    }
    out << "psi_prime0 = " << fmt_double(cfg.mech.psi_prime0) << "\n\n";

    out << "[run]\n";
    out << "z = " << fmt_double(cfg.z) << "\n";
    out << "x = " << fmt_double(cfg.x) << "\n";
    out << "t = " << fmt_double(cfg.t) << "\n";
    if (!cfg.t_grid.empty()) {
        const double step = cfg.t_grid.size() > 1 ? cfg.t_grid[1] - cfg.t_grid[0] : 1.0;
        out << "t_grid = " << fmt_double(cfg.t_grid.front()) << ":" << fmt_double(cfg.t_grid.back())
            << ":" << fmt_double(step) << "\n";
    }
    if (!cfg.x_grid.empty()) {
        const double step = cfg.x_grid.size() > 1 ? cfg.x_grid[1] - cfg.x_grid[0] : 1.0;
        out << "x_grid = " << fmt_double(cfg.x_grid.front()) << ":" << fmt_double(cfg.x_grid.back())
            << ":" << fmt_double(step) << "\n";
    }
    out << "n_paths = " << cfg.n_paths << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "threads = " << cfg.threads << "\n";
    out << "max_step = " << fmt_double(cfg.max_step) << "\n";
    out << "dt = " << fmt_double(cfg.dt) << "\n";
    out << "ode_tol = " << fmt_double(cfg.ode_tol) << "\n";
    out << "eps_sign = " << fmt_double(cfg.eps_sign) << "\n";
    out << "gamma_tol = " << fmt_double(cfg.gamma_tol) << "\n";
    out << "renewal_h = " << fmt_double(cfg.renewal_h) << "\n";
    out << "t_lad = " << fmt_double(cfg.t_lad) << "\n\n";

    out << "[output]\n";
    out << "dir = " << cfg.out_dir << "\n";
    return out.str();
}

}  // namespace cble
