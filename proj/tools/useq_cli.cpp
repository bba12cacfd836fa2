// useq: validate, evaluate, filter, convert, compare, marginalize, sample,
// and export sequence models from the command line.
//
// Exit codes: 0 success, 1 validation/usage failure, 2 numeric failure,
// 3 I/O or parse error. Errors additionally emit one machine-readable line
// on stderr: error kind=<Kind> message="...".

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <useq/useq.hpp>
#include <useq/serialize.hpp>

namespace {

using namespace useq;

// ---------------------------------------------------------------------------
// Deterministic formatting

std::string fmt_double(double x, int digits = 17) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
    return buf;
}

std::string fmt_complex(Complex z, int digits = 17) {
    return "(" + fmt_double(z.real(), digits) + "," + fmt_double(z.imag(), digits) + ")";
}

std::string fmt_vector(const ComplexVector& v, int digits = 17) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.dim(); ++i) {
        if (i) s += ",";
        s += fmt_complex(v[i], digits);
    }
    return s + "]";
}

std::string fmt_sequence(const Sequence& seq) {
    std::string s;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) s += " ";
        s += std::to_string(seq[i]);
    }
    return s;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Ordered key/value run report. Porcelain output is key=value with full
// 17-digit doubles; human output shortens to 12 digits.
struct RunReport {
    struct Field {
        std::string key;
        std::string porcelain;
        std::string human;
    };
    std::vector<Field> fields;

    void add(const std::string& key, const std::string& value) {
        fields.push_back({key, value, value});
    }
    void add(const std::string& key, double value) {
        fields.push_back({key, fmt_double(value, 17), fmt_double(value, 12)});
    }
    void add(const std::string& key, std::size_t value) {
        fields.push_back({key, std::to_string(value), std::to_string(value)});
    }
    void add(const std::string& key, bool value) {
        const std::string s = value ? "true" : "false";
        fields.push_back({key, s, s});
    }
    void add_state(const std::string& key, const ComplexVector& v) {
        fields.push_back({key, fmt_vector(v, 17), fmt_vector(v, 12)});
    }
    void add_complex(const std::string& key, Complex z) {
        fields.push_back({key, fmt_complex(z, 17), fmt_complex(z, 12)});
    }

    void print(bool porcelain, std::ostream& os = std::cout) const {
        for (const auto& f : fields) {
            if (porcelain)
                os << f.key << "=" << f.porcelain << "\n";
            else
                os << f.key << ": " << f.human << "\n";
        }
    }
};

struct GlobalOptions {
    double tol = 1e-9;
    std::size_t max_iter = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // 0 = all cores
    bool porcelain = false;

    unsigned resolved_threads() const {
        if (threads != 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw ? hw : 1;
    }
};

struct LoadedModel {
    AnyModel any;
    std::string digest;
    std::string path;
};

LoadedModel load_input(const std::string& path) {
    std::string text;
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return {parse_model(text), hex64(fnv1a(text)), path};
}

Sequence parse_sequence(const std::string& text, bool allow_empty = false) {
    Sequence seq;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        try {
            const long long v = std::stoll(tok);
            if (v < 0) throw Error(ErrorKind::InvalidModel, "negative symbol index '" + tok + "'");
            seq.push_back(static_cast<std::size_t>(v));
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidModel, "bad symbol index '" + tok + "'");
        }
    }
    if (seq.empty() && !allow_empty)
        throw Error(ErrorKind::InvalidModel, "sequence must contain at least one symbol");
    return seq;
}

// Action-observation pairs as "a:y" tokens.
AoSequence parse_ao_sequence(const std::string& text) {
    AoSequence seq;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        const std::size_t colon = tok.find(':');
        if (colon == std::string::npos)
            throw Error(ErrorKind::InvalidModel,
                        "controlled sequences use action:observation pairs, got '" + tok + "'");
        try {
            const long long a = std::stoll(tok.substr(0, colon));
            const long long y = std::stoll(tok.substr(colon + 1));
            if (a < 0 || y < 0) throw std::invalid_argument("negative");
            seq.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(y)});
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidModel, "bad action:observation pair '" + tok + "'");
        }
    }
    if (seq.empty())
        throw Error(ErrorKind::InvalidModel, "sequence must contain at least one pair");
    return seq;
}

std::string model_type_of(const AnyModel& any) {
    if (any.controlled())
        return std::visit(
            [](const auto& m) -> std::string {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, Pomdp>) return "pomdp";
                else if constexpr (std::is_same_v<T, IoHqmm>) return "io_hqmm";
                else return "qomdp";
            },
            any.controlled_model());
    return model_kind_name(kind_of(any.model()));
}

ValidationReport validate_any(const AnyModel& any, double tol) {
    if (any.controlled()) return validate(any.controlled_model(), tol);
    return validate(any.model(), tol);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_validate(const GlobalOptions& g, const std::string& file) {
    const LoadedModel in = load_input(file);
    const ValidationReport rep = validate_any(in.any, g.tol);

    RunReport out;
    out.add("command", std::string("validate"));
    out.add("input", in.path);
    out.add("input_digest", in.digest);
    out.add("model_type", model_type_of(in.any));
    out.add("tol", g.tol);
    out.add("valid", rep.valid());
    out.add("violation_count", rep.violations.size());
    for (std::size_t i = 0; i < rep.violations.size(); ++i) {
        out.add("violation_" + std::to_string(i), rep.violations[i].invariant);
        out.add("violation_" + std::to_string(i) + "_residual", rep.violations[i].residual);
    }
    out.add("status", std::string(rep.valid() ? "ok" : "invalid"));
    out.add("exit_code", std::size_t(rep.valid() ? 0 : 1));
    out.print(g.porcelain);
    return rep.valid() ? 0 : 1;
}

FixedPointResult fixed_point_for(const Model& m, const GlobalOptions& g) {
    return std::visit(
        [&](const auto& v) -> FixedPointResult {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Umps>)
                return dominant_left_eigenpair(transfer_operator(v), 1e-12, g.max_iter);
            else if constexpr (std::is_same_v<T, Ubm> || std::is_same_v<T, Ulps>)
                return dominant_left_eigenpair(transfer_operator_lifted(v), 1e-12, g.max_iter);
            else
                throw Error(ErrorKind::InvalidModel,
                            "fixed-point conditionals apply to umps/ubm/ulps only");
        },
        m);
}

int cmd_eval(const GlobalOptions& g, const std::string& file, const std::string& seq_text,
             const std::string& semantics) {
    const LoadedModel in = load_input(file);
    RunReport out;
    out.add("command", std::string("eval"));
    out.add("input", in.path);
    out.add("input_digest", in.digest);
    out.add("model_type", model_type_of(in.any));
    out.add("semantics", semantics);
    out.add("sequence", seq_text);

    if (in.any.controlled()) {
        const AoSequence seq = parse_ao_sequence(seq_text);
        if (semantics == "joint") {
            out.add("joint", controlled_joint(in.any.controlled_model(), seq));
        } else {
            FilterState st = controlled_filter_init(in.any.controlled_model());
            for (std::size_t t = 0; t < seq.size(); ++t) {
                const double before = st.log_prob;
                st = controlled_filter(in.any.controlled_model(), st, seq[t].action, seq[t].obs);
                out.add("conditional_" + std::to_string(t), std::exp(st.log_prob - before));
            }
            out.add("log_prob", st.log_prob);
        }
        out.add("status", std::string("ok"));
        out.add("exit_code", std::size_t(0));
        out.print(g.porcelain);
        return 0;
    }

    const Model& m = in.any.model();
    const Sequence seq = parse_sequence(seq_text);
    if (semantics == "joint") {
        const JointResult r = joint(m, seq);
        out.add("joint", r.value);
        out.add("imag_magnitude", r.imag_magnitude);
        out.add("imag_suspect", r.imag_suspect);
    } else {
        const ModelKind kind = kind_of(m);
        if (kind == ModelKind::Umps || kind == ModelKind::Ubm || kind == ModelKind::Ulps) {
            const FixedPointResult fp = fixed_point_for(m, g);
            out.add_complex("transfer_eigenvalue", fp.eigenvalue);
            out.add("spectral_ratio", fp.gap);
            double log_prob = 0.0;
            for (std::size_t t = 0; t < seq.size(); ++t) {
                const Sequence prefix(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t));
                const double c = std::visit(
                    [&](const auto& v) -> double {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, Umps> || std::is_same_v<T, Ubm> ||
                                      std::is_same_v<T, Ulps>)
                            return conditional_nonterminating(v, prefix, seq[t], fp);
                        else
                            throw Error(ErrorKind::InvalidModel, "unreachable");
                    },
                    m);
                out.add("conditional_" + std::to_string(t), c);
                log_prob += std::log(std::abs(c));
            }
            out.add("log_prob", log_prob);
        } else {
            FilterState st = filter_init(m);
            for (std::size_t t = 0; t < seq.size(); ++t) {
                const double before = st.log_prob;
                st = filter_step(m, st, seq[t]);
                out.add("conditional_" + std::to_string(t), std::exp(st.log_prob - before));
            }
            out.add("log_prob", st.log_prob);
            out.add("nonpositive_prefix", st.nonpositive);
        }
    }
    out.add("status", std::string("ok"));
    out.add("exit_code", std::size_t(0));
    out.print(g.porcelain);
    return 0;
}

int cmd_filter(const GlobalOptions& g, const std::string& file, const std::string& seq_text) {
    const LoadedModel in = load_input(file);
    RunReport out;
    out.add("command", std::string("filter"));
    out.add("input", in.path);
    out.add("input_digest", in.digest);
    out.add("model_type", model_type_of(in.any));
    out.add("sequence", seq_text);

    if (in.any.controlled()) {
        const AoSequence seq = parse_ao_sequence(seq_text);
        FilterState st = controlled_filter_init(in.any.controlled_model());
        out.add_state("state_0", st.state);
        for (std::size_t t = 0; t < seq.size(); ++t) {
            const double before = st.log_prob;
            st = controlled_filter(in.any.controlled_model(), st, seq[t].action, seq[t].obs);
            out.add("conditional_" + std::to_string(t + 1), std::exp(st.log_prob - before));
            out.add_state("state_" + std::to_string(t + 1), st.state);
        }
        out.add("log_prob", st.log_prob);
    } else {
        const Sequence seq = parse_sequence(seq_text);
        FilterState st = filter_init(in.any.model());
        out.add_state("state_0", st.state);
        for (std::size_t t = 0; t < seq.size(); ++t) {
            const double before = st.log_prob;
            st = filter_step(in.any.model(), st, seq[t]);
            out.add("conditional_" + std::to_string(t + 1), std::exp(st.log_prob - before));
            out.add_state("state_" + std::to_string(t + 1), st.state);
        }
        out.add("log_prob", st.log_prob);
        out.add("nonpositive_prefix", st.nonpositive);
    }
    out.add("status", std::string("ok"));
    out.add("exit_code", std::size_t(0));
    out.print(g.porcelain);
    return 0;
}

int cmd_convert(const GlobalOptions& g, const std::string& file, const std::string& target,
                const std::string& out_file) {
    const LoadedModel in = load_input(file);
    RunReport out;
    out.add("command", std::string("convert"));
    out.add("input", in.path);
    out.add("input_digest", in.digest);
    out.add("model_type", model_type_of(in.any));
    out.add("target_type", target);

    std::optional<AnyModel> converted;
    std::optional<ConversionReport> report;

    if (in.any.controlled()) {
        const ControlledModel& cm = in.any.controlled_model();
        if (target == "io_hqmm" && std::holds_alternative<Qomdp>(cm))
            converted = AnyModel{ControlledModel(qomdp_to_iohqmm(std::get<Qomdp>(cm), g.tol))};
    } else {
        const Model& m = in.any.model();
        if (target == "psr" && std::holds_alternative<Hmm>(m)) {
            converted = AnyModel{Model(hmm_to_psr(std::get<Hmm>(m), g.tol))};
        } else if (target == "psr" && std::holds_alternative<Noom>(m)) {
            converted = AnyModel{Model(noom_to_psr(std::get<Noom>(m), g.tol))};
        } else if (target == "psr" && std::holds_alternative<Umps>(m)) {
            auto [psr, rep] = umps_to_psr(std::get<Umps>(m), g.tol, g.max_iter);
            converted = AnyModel{Model(std::move(psr))};
            report = std::move(rep);
        } else if (target == "umps" && std::holds_alternative<Ubm>(m)) {
            converted = AnyModel{Model(ubm_to_psr(std::get<Ubm>(m)))};
        } else if (target == "noom" && std::holds_alternative<Ubm>(m)) {
            auto [noom, rep] = ubm_to_noom(std::get<Ubm>(m), g.tol, g.max_iter);
            converted = AnyModel{Model(std::move(noom))};
            report = std::move(rep);
        } else if (target == "hqmm" && std::holds_alternative<Noom>(m)) {
            converted = AnyModel{Model(noom_to_hqmm(std::get<Noom>(m), g.tol))};
        } else if (target == "hqmm" && std::holds_alternative<Ulps>(m)) {
            auto [hqmm, rep] = ulps_to_hqmm(std::get<Ulps>(m), g.tol, g.max_iter);
            converted = AnyModel{Model(std::move(hqmm))};
            report = std::move(rep);
        } else if (target == "ulps" && std::holds_alternative<Hqmm>(m)) {
            converted = AnyModel{Model(hqmm_to_ulps(std::get<Hqmm>(m), g.tol))};
        }
    }

    if (!converted)
        throw Error(ErrorKind::InvalidModel,
                    "no conversion from " + model_type_of(in.any) + " to " + target);

    write_model_file(out_file, *converted);
    out.add("output", out_file);
    if (report) {
        out.add_complex("rescale_factor", report->rescale_factor);
        for (const auto& [k, v] : report->residuals) out.add(k, v);
    }
    const ValidationReport check = validate_any(*converted, g.tol);
    out.add("output_valid", check.valid());
    out.add("status", std::string("ok"));
    out.add("exit_code", std::size_t(check.valid() ? 0 : 1));
    // when the model streams to stdout, the report moves to stderr
    out.print(g.porcelain, out_file == "-" ? std::cerr : std::cout);
    return check.valid() ? 0 : 1;
}

int cmd_compare(const GlobalOptions& g, const std::string& file_a, const std::string& file_b,
                std::size_t max_len, double tol, const std::string& semantics, std::size_t horizon) {
    const LoadedModel a = load_input(file_a);
    const LoadedModel b = load_input(file_b);
    if (a.any.controlled() || b.any.controlled())
        throw Error(ErrorKind::InvalidModel, "compare applies to uncontrolled models");

    const CompareSemantics sem =
        semantics == "conditional" ? CompareSemantics::Conditional : CompareSemantics::Joint;
    const EquivalenceReport rep =
        equivalent(a.any.model(), b.any.model(), max_len, tol, sem, g.resolved_threads(), horizon);

    RunReport out;
    out.add("command", std::string("compare"));
    out.add("input_a", a.path);
    out.add("input_a_digest", a.digest);
    out.add("input_b", b.path);
    out.add("input_b_digest", b.digest);
    out.add("semantics", semantics);
    out.add("max_len", max_len);
    out.add("tol", tol);
    out.add("max_abs_deviation", rep.max_abs_deviation);
    out.add("witness", fmt_sequence(rep.witness));
    for (std::size_t i = 0; i < rep.per_length.size(); ++i)
        out.add("deviation_len_" + std::to_string(i + 1), rep.per_length[i]);
    out.add("equivalent", rep.equivalent);
    out.add("status", std::string(rep.equivalent ? "ok" : "deviation above tol"));
    out.add("exit_code", std::size_t(rep.equivalent ? 0 : 1));
    out.print(g.porcelain);
    return rep.equivalent ? 0 : 1;
}

int cmd_marginalize(const GlobalOptions& g, const std::string& file, const std::string& prefix_text,
                    std::size_t total_len) {
    const LoadedModel in = load_input(file);
    if (in.any.controlled())
        throw Error(ErrorKind::InvalidModel, "marginalize applies to uncontrolled models");
    const Sequence prefix = parse_sequence(prefix_text, /*allow_empty=*/true);

    const double value = std::visit(
        [&](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Umps> || std::is_same_v<T, Ubm> ||
                          std::is_same_v<T, Ulps>)
                return finite_marginal(v, prefix, total_len);
            else
                throw Error(ErrorKind::InvalidModel, "marginalize applies to umps/ubm/ulps");
        },
        in.any.model());

    RunReport out;
    out.add("command", std::string("marginalize"));
    out.add("input", in.path);
    out.add("input_digest", in.digest);
    out.add("model_type", model_type_of(in.any));
    out.add("prefix", prefix_text);
    out.add("total_len", total_len);
    out.add("marginal", value);
    out.add("status", std::string("ok"));
    out.add("exit_code", std::size_t(0));
    out.print(g.porcelain);
    return 0;
}

int cmd_sample(const GlobalOptions& g, const std::string& file, std::size_t length,
               std::size_t count) {
    const LoadedModel in = load_input(file);
    if (in.any.controlled())
        throw Error(ErrorKind::InvalidModel,
                    "sampling a controlled model needs an action policy; not supported");

    RunReport out;
    out.add("command", std::string("sample"));
    out.add("input", in.path);
    out.add("input_digest", in.digest);
    out.add("model_type", model_type_of(in.any));
    out.add("length", length);
    out.add("count", count);
    out.add("seed", std::to_string(g.seed));
    for (std::size_t i = 0; i < count; ++i) {
        const Sequence s = sample(in.any.model(), length, g.seed + i);
        out.add("sample_" + std::to_string(i), fmt_sequence(s));
    }
    out.add("status", std::string("ok"));
    out.add("exit_code", std::size_t(0));
    out.print(g.porcelain);
    return 0;
}

int cmd_gallery(const GlobalOptions& g, const std::string& name, const std::string& out_file,
                double theta, double damping, const std::string& kind, std::size_t dim,
                std::size_t obs, std::size_t actions) {
    RunReport out;
    out.add("command", std::string("gallery"));
    out.add("name", name);

    std::optional<AnyModel> model;
    if (name == "appendix_hmm") {
        const NamedInstance inst = appendix_hmm();
        out.add("provenance", inst.provenance);
        out.add("expected_facts", inst.expected_facts.size());
        model = AnyModel{inst.model};
    } else if (name == "oscillating_noom") {
        const NamedInstance inst = oscillating_noom(theta, damping);
        out.add("provenance", inst.provenance);
        out.add("theta", theta);
        out.add("damping", damping);
        out.add("expected_facts", inst.expected_facts.size());
        model = AnyModel{inst.model};
    } else if (name == "random") {
        out.add("kind", kind);
        out.add("dim", dim);
        out.add("obs", obs);
        out.add("seed", std::to_string(g.seed));
        if (kind == "pomdp") {
            out.add("actions", actions);
            model = AnyModel{ControlledModel(random_pomdp(dim, actions, obs, g.seed))};
        } else if (kind == "qomdp") {
            out.add("actions", actions);
            model = AnyModel{ControlledModel(random_qomdp(dim, actions, obs, g.seed))};
        } else if (kind == "io_hqmm") {
            out.add("actions", actions);
            model = AnyModel{ControlledModel(random_io_hqmm(dim, actions, obs, g.seed))};
        } else {
            ModelKind mk;
            if (kind == "hmm") mk = ModelKind::Hmm;
            else if (kind == "psr") mk = ModelKind::Psr;
            else if (kind == "umps") mk = ModelKind::Umps;
            else if (kind == "ubm") mk = ModelKind::Ubm;
            else if (kind == "noom") mk = ModelKind::Noom;
            else if (kind == "hqmm") mk = ModelKind::Hqmm;
            else if (kind == "ulps") mk = ModelKind::Ulps;
            else if (kind == "mps_chain") mk = ModelKind::MpsChain;
            else throw Error(ErrorKind::InvalidModel, "unknown random kind '" + kind + "'");
            model = AnyModel{random_model(mk, dim, obs, g.seed)};
        }
    } else {
        throw Error(ErrorKind::InvalidModel, "unknown gallery name '" + name + "'");
    }

    write_model_file(out_file, *model);
    out.add("output", out_file);
    out.add("status", std::string("ok"));
    out.add("exit_code", std::size_t(0));
    out.print(g.porcelain, out_file == "-" ? std::cerr : std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uniform tensor-network sequence models: evaluation, conversion, and oracles"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    GlobalOptions g;
    app.add_option("--tol", g.tol, "validation/conversion tolerance")->envname("USEQ_TOL");
    app.add_option("--max-iter", g.max_iter, "power-iteration cap")->envname("USEQ_MAX_ITER");
    app.add_option("--seed", g.seed, "random seed")->envname("USEQ_SEED");
    app.add_option("--threads", g.threads, "enumeration threads, 0 = all cores")
        ->envname("USEQ_THREADS");
    app.add_flag("--porcelain", g.porcelain, "line-oriented key=value output");

    std::string file, file_b, seq_text, semantics = "joint", target, out_file = "-";
    std::size_t max_len = 4, total_len = 0, length = 8, count = 1;
    std::size_t horizon = 300;
    double cmp_tol = 1e-9;
    std::string gallery_name, random_kind = "hmm";
    double theta = 0.6, damping = 0.9;
    std::size_t dim = 2, obs = 2, actions = 2;

    CLI::App* validate_cmd = app.add_subcommand("validate", "check a model's invariants");
    validate_cmd->add_option("file", file, "model file or -")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "joint or conditional probability of a sequence");
    eval_cmd->add_option("file", file)->required();
    eval_cmd->add_option("--seq", seq_text, "space-separated symbols (a:y pairs for controlled)")
        ->required();
    eval_cmd->add_option("--semantics", semantics, "joint|conditional")
        ->check(CLI::IsMember({"joint", "conditional"}));

    CLI::App* filter_cmd = app.add_subcommand("filter", "run the recursive state update");
    filter_cmd->add_option("file", file)->required();
    filter_cmd->add_option("--seq", seq_text)->required();

    CLI::App* convert_cmd = app.add_subcommand("convert", "convert between model classes");
    convert_cmd->add_option("file", file)->required();
    convert_cmd->add_option("--to", target, "target model type")->required();
    convert_cmd->add_option("--out", out_file, "output file or -");

    CLI::App* compare_cmd = app.add_subcommand("compare", "bounded-length equivalence check");
    compare_cmd->add_option("file_a", file)->required();
    compare_cmd->add_option("file_b", file_b)->required();
    compare_cmd->add_option("--max-len", max_len);
    compare_cmd->add_option("--tol", cmp_tol);
    compare_cmd->add_option("--semantics", semantics, "joint|conditional")
        ->check(CLI::IsMember({"joint", "conditional"}));
    compare_cmd->add_option("--horizon", horizon, "finite-N horizon for conditional semantics");

    CLI::App* marg_cmd = app.add_subcommand("marginalize", "finite-N prefix marginal");
    marg_cmd->add_option("file", file)->required();
    marg_cmd->add_option("--prefix", seq_text, "prefix symbols (may be empty)");
    marg_cmd->add_option("--total-len", total_len)->required();

    CLI::App* sample_cmd = app.add_subcommand("sample", "ancestral sampling");
    sample_cmd->add_option("file", file)->required();
    sample_cmd->add_option("--length", length);
    sample_cmd->add_option("--count", count);

    CLI::App* gallery_cmd = app.add_subcommand("gallery", "export a named or random instance");
    gallery_cmd->add_option("name", gallery_name, "appendix_hmm|oscillating_noom|random")->required();
    gallery_cmd->add_option("--out", out_file, "output file or -");
    gallery_cmd->add_option("--theta", theta);
    gallery_cmd->add_option("--damping", damping);
    gallery_cmd->add_option("--kind", random_kind, "model class for random instances");
    gallery_cmd->add_option("--dim", dim);
    gallery_cmd->add_option("--obs", obs);
    gallery_cmd->add_option("--actions", actions);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(validate_cmd)) return cmd_validate(g, file);
        if (app.got_subcommand(eval_cmd)) return cmd_eval(g, file, seq_text, semantics);
        if (app.got_subcommand(filter_cmd)) return cmd_filter(g, file, seq_text);
        if (app.got_subcommand(convert_cmd)) return cmd_convert(g, file, target, out_file);
        if (app.got_subcommand(compare_cmd))
            return cmd_compare(g, file, file_b, max_len, cmp_tol, semantics, horizon);
        if (app.got_subcommand(marg_cmd)) return cmd_marginalize(g, file, seq_text, total_len);
        if (app.got_subcommand(sample_cmd)) return cmd_sample(g, file, length, count);
        if (app.got_subcommand(gallery_cmd))
            return cmd_gallery(g, gallery_name, out_file, theta, damping, random_kind, dim, obs,
                               actions);
    } catch (const Error& e) {
        std::cerr << "error kind=" << error_kind_name(e.kind()) << " message=\"" << e.what()
                  << "\"\n";
        switch (e.kind()) {
            case ErrorKind::InvalidModel: return 1;
            case ErrorKind::ParseError:
            case ErrorKind::IoError: return 3;
            default: return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error kind=Internal message=\"" << e.what() << "\"\n";
        return 2;
    }
    return 0;
}
