#include "duotok/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "duotok/bestrq.hpp"
#include "duotok/data.hpp"
#include "duotok/dsp.hpp"
#include "duotok/features.hpp"
#include "duotok/lmeval.hpp"
#include "duotok/simvq.hpp"
#include "duotok/tokens.hpp"

namespace fs = std::filesystem;

namespace duotok::cli {

namespace {

std::string trim(const std::string &s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

const KeySpec *find_key(const std::vector<KeySpec> &known, const std::string &name) {
    for (const KeySpec &k : known)
        if (k.name == name) return &k;
    return nullptr;
}

void finalize(RunConfig &cfg, const std::vector<KeySpec> &known) {
    for (const KeySpec &k : known) {
        if (cfg.values.count(k.name)) continue;
        if (k.default_value) {
            cfg.values[k.name] = *k.default_value;
        } else if (k.required) {
            throw ConfigError("missing required key: " + k.name);
        }
    }
}

}  // namespace

const std::string &RunConfig::str(const std::string &key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing key: " + key);
    return it->second;
}

std::int64_t RunConfig::i64(const std::string &key) const {
    const std::string &v = str(key);
    try {
        std::size_t used = 0;
        std::int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception &) {
        throw ConfigError("key " + key + " expects an integer, got '" + v + "'");
    }
}

double RunConfig::f64(const std::string &key) const {
    const std::string &v = str(key);
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception &) {
        throw ConfigError("key " + key + " expects a number, got '" + v + "'");
    }
}

bool RunConfig::flag(const std::string &key) const {
    const std::string &v = str(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("key " + key + " expects a boolean, got '" + v + "'");
}

std::string RunConfig::serialize() const {
    std::ostringstream out;
    for (const auto &[key, value] : values) out << key << " = " << value << "\n";
    return out.str();
}

RunConfig parse_config_file(const std::string &path, const std::vector<KeySpec> &known) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (!find_key(known, key))
            throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        cfg.values[key] = value;
    }
    return cfg;
}

RunConfig parse_run_config(const std::vector<std::string> &args, const std::vector<KeySpec> &known,
                           bool allow_positional) {
    std::map<std::string, std::string> cli_values;
    std::string config_path;
    RunConfig cfg;

    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string &arg = args[i];
        if (arg.rfind("--", 0) == 0) {
            std::string key = arg.substr(2);
            if (i + 1 >= args.size()) throw ConfigError("flag --" + key + " needs a value");
            std::string value = args[++i];
            if (key == "config") {
                config_path = value;
                continue;
            }
            if (!find_key(known, key)) throw ConfigError("unknown key '" + key + "'");
            cli_values[key] = value;
        } else if (allow_positional) {
            cfg.positional.push_back(arg);
        } else {
            throw ConfigError("unexpected positional argument '" + arg + "'");
        }
    }

    if (!config_path.empty()) {
        RunConfig from_file = parse_config_file(config_path, known);
        cfg.values = std::move(from_file.values);
    }
    for (auto &[key, value] : cli_values) cfg.values[key] = value;  // CLI wins over file
    finalize(cfg, known);
    return cfg;
}

// ---------------------------------------------------------------------------
// Key tables

namespace {

const std::vector<KeySpec> kFeaturizeKeys = {
    {"in", std::nullopt, true, "input WAV path"},
    {"out", std::nullopt, true, "output DTFT path"},
    {"fft_size", "1024", false, "FFT size (power of two)"},
    {"hop", "240", false, "hop length in samples"},
    {"n_mels", "128", false, "mel band count"},
    {"fmin", "0", false, "lowest mel edge in Hz"},
    {"fmax", "", false, "highest mel edge in Hz (empty = Nyquist)"},
    {"eps", "1e-5", false, "log floor"},
    {"kind", "logmel", false, "logmel or chroma"},
    {"center", "1", false, "center-pad frames"},
};

const std::vector<KeySpec> kBestrqKeys = {
    {"features", std::nullopt, true, "input DTFT path"},
    {"out", std::nullopt, true, "output CSV path (frame,target)"},
    {"seed", std::nullopt, true, "random seed (required, no default)"},
    {"d_proj", "16", false, "projection dimension"},
    {"k", "8192", false, "random codebook size"},
    {"quantizer_out", "", false, "optional DTRQ output path"},
};

const std::vector<KeySpec> kTrainVqKeys = {
    {"manifest", std::nullopt, true, "feature manifest: path<TAB>route per line"},
    {"out", std::nullopt, true, "output base path (.vocal.dtcb / .accomp.dtcb)"},
    {"seed", std::nullopt, true, "random seed (required, no default)"},
    {"steps", std::nullopt, true, "training steps"},
    {"k", "1024", false, "codebook size"},
    {"beta", "0.25", false, "commitment weight"},
    {"peak_lr", "1e-4", false, "peak learning rate"},
    {"warmup_steps", "3000", false, "linear warmup steps"},
    {"cycle_steps", "30000", false, "cosine cycle length"},
    {"beta1", "0.9", false, "AdamW beta1"},
    {"beta2", "0.96", false, "AdamW beta2"},
    {"weight_decay", "0.1", false, "AdamW weight decay"},
    {"adam_eps", "1e-8", false, "AdamW epsilon"},
    {"log", "", false, "training log CSV path (default <out>.log.csv)"},
};

const std::vector<KeySpec> kTokenizeKeys = {
    {"features", std::nullopt, true, "input DTFT path"},
    {"codebook", std::nullopt, true, "input DTCB path"},
    {"route", std::nullopt, true, "vocal or accomp"},
    {"out", std::nullopt, true, "output DTOK path"},
    {"beta", "0.25", false, "commitment weight (loss reporting only)"},
};

const std::vector<KeySpec> kEvalLmKeys = {
    {"tokens", std::nullopt, true, "directory of DTOK files"},
    {"out", std::nullopt, true, "output report CSV"},
    {"baseline_bigram", "0", false, "use the add-alpha bigram baseline"},
    {"alpha", "1.0", false, "bigram smoothing"},
    {"predictor_vocal", "", false, "DTLP file for the vocal route"},
    {"predictor_accomp", "", false, "DTLP file for the accompaniment route"},
    {"tau", "", false, "conditional prefix frames (empty = 2 s at the token rate)"},
};

const std::vector<KeySpec> kParetoKeys = {
    {"out", std::nullopt, true, "combined CSV output"},
};

}  // namespace

const std::vector<KeySpec> &keys_for(const std::string &verb) {
    if (verb == "featurize") return kFeaturizeKeys;
    if (verb == "bestrq-targets") return kBestrqKeys;
    if (verb == "train-vq") return kTrainVqKeys;
    if (verb == "tokenize") return kTokenizeKeys;
    if (verb == "eval-lm") return kEvalLmKeys;
    if (verb == "pareto") return kParetoKeys;
    throw ConfigError("unknown command: " + verb);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_featurize(const RunConfig &cfg) {
    dsp::Waveform w = data::load_wav(cfg.str("in"));
    dsp::StftConfig stft_cfg;
    stft_cfg.fft_size = cfg.i64("fft_size");
    stft_cfg.hop = cfg.i64("hop");
    stft_cfg.center_pad = cfg.flag("center");
    dsp::ComplexSpectrogram spec = dsp::stft(w, stft_cfg);

    FeatureSequence fs;
    fs.frame_rate = spec.frame_rate;
    const std::string &kind = cfg.str("kind");
    if (kind == "logmel") {
        double fmax = cfg.str("fmax").empty() ? w.sample_rate / 2.0 : cfg.f64("fmax");
        Matrix fb = dsp::mel_filterbank(w.sample_rate, stft_cfg.fft_size, cfg.i64("n_mels"),
                                        cfg.f64("fmin"), fmax);
        fs.values = dsp::log_mel(spec, fb, cfg.f64("eps"));
    } else if (kind == "chroma") {
        fs.values = dsp::chroma(spec).values;
    } else {
        throw ConfigError("kind must be logmel or chroma, got '" + kind + "'");
    }
    write_features(cfg.str("out"), fs);
    return kExitOk;
}

int cmd_bestrq_targets(const RunConfig &cfg) {
    FeatureSequence fs = read_features(cfg.str("features"));
    auto rq = bestrq::init_random_quantizer(static_cast<std::uint64_t>(cfg.i64("seed")),
                                            fs.dim(), cfg.i64("d_proj"), cfg.i64("k"));
    std::vector<std::uint32_t> targets = bestrq::assign_targets(fs, rq);

    std::ofstream out(cfg.str("out"));
    if (!out) throw DataError("cannot open for writing: " + cfg.str("out"));
    out << "frame,target\n";
    for (std::size_t t = 0; t < targets.size(); ++t) out << t << ',' << targets[t] << '\n';
    if (!out) throw DataError("write failed: " + cfg.str("out"));

    if (!cfg.str("quantizer_out").empty()) bestrq::write_quantizer(cfg.str("quantizer_out"), rq);
    return kExitOk;
}

namespace {

std::vector<simvq::Batch> load_manifest(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    fs::path base = fs::path(path).parent_path();
    std::vector<simvq::Batch> batches;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t tab = stripped.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 'path<TAB>route'");
        fs::path feature_path = trim(stripped.substr(0, tab));
        if (feature_path.is_relative()) feature_path = base / feature_path;
        Route route = route_from_name(trim(stripped.substr(tab + 1)));
        batches.push_back({read_features(feature_path.string()), route});
    }
    if (batches.empty()) throw DataError("manifest lists no feature files: " + path);
    return batches;
}

}  // namespace

int cmd_train_vq(const RunConfig &cfg) {
    std::vector<simvq::Batch> batches = load_manifest(cfg.str("manifest"));
    std::int64_t d = batches.front().features.dim();
    for (const simvq::Batch &b : batches)
        if (b.features.dim() != d) throw DataError("manifest mixes feature dimensions");

    auto bank = simvq::init_bank(static_cast<std::uint64_t>(cfg.i64("seed")), cfg.i64("k"), d);
    simvq::TrainOptions opts;
    opts.beta = cfg.f64("beta");
    opts.steps = cfg.i64("steps");
    opts.schedule = {cfg.f64("peak_lr"), cfg.i64("warmup_steps"), cfg.i64("cycle_steps")};
    opts.optimizer = {cfg.f64("beta1"), cfg.f64("beta2"), cfg.f64("weight_decay"),
                      cfg.f64("adam_eps")};

    std::vector<simvq::TrainRecord> log = simvq::train_w(batches, bank, opts);

    const std::string &base = cfg.str("out");
    simvq::write_codebook(base + ".vocal.dtcb", bank.vocal);
    simvq::write_codebook(base + ".accomp.dtcb", bank.accomp);

    std::string log_path = cfg.str("log").empty() ? base + ".log.csv" : cfg.str("log");
    std::ofstream out(log_path);
    if (!out) throw DataError("cannot open for writing: " + log_path);
    out << "step,lr,vq_loss,utilization,entropy\n";
    for (const simvq::TrainRecord &r : log)
        out << r.step << ',' << r.lr << ',' << r.vq_loss << ',' << r.utilization << ','
            << r.entropy << '\n';
    if (!out) throw DataError("write failed: " + log_path);
    return kExitOk;
}

int cmd_tokenize(const RunConfig &cfg) {
    FeatureSequence fs = read_features(cfg.str("features"));
    simvq::Codebook cb = simvq::read_codebook(cfg.str("codebook"));
    Route route = route_from_name(cfg.str("route"));
    simvq::QuantizeResult res = simvq::quantize(fs, cb, cfg.f64("beta"));

    tokens::TrackTokens track;
    track.route = route;
    track.vocab_size = static_cast<std::uint32_t>(cb.size());
    track.rate = fs.frame_rate;
    track.indices = std::move(res.indices);
    tokens::write_tokens(cfg.str("out"), {track});
    return kExitOk;
}

namespace {

std::vector<tokens::DualTrackSequence> load_token_corpus(const std::string &dir) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".dtok")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .dtok files under " + dir);

    std::vector<tokens::DualTrackSequence> corpus;
    std::map<std::string, std::pair<std::optional<tokens::TrackTokens>, std::optional<tokens::TrackTokens>>> singles;
    for (const fs::path &p : files) {
        std::vector<tokens::TrackTokens> tracks = tokens::read_tokens(p.string());
        if (tracks.size() == 2) {
            if (tracks[0].route == Route::Accompaniment) std::swap(tracks[0], tracks[1]);
            corpus.push_back(tokens::align(std::move(tracks[0]), std::move(tracks[1])));
        } else if (tracks.size() == 1) {
            std::string name = p.filename().string();
            std::string suffix_v = ".vocal.dtok";
            std::string suffix_a = ".accomp.dtok";
            std::string stem;
            if (name.size() > suffix_v.size() &&
                name.compare(name.size() - suffix_v.size(), suffix_v.size(), suffix_v) == 0)
                stem = name.substr(0, name.size() - suffix_v.size());
            else if (name.size() > suffix_a.size() &&
                     name.compare(name.size() - suffix_a.size(), suffix_a.size(), suffix_a) == 0)
                stem = name.substr(0, name.size() - suffix_a.size());
            else
                throw DataError("single-track token file must end in .vocal.dtok or .accomp.dtok: " +
                                p.string());
            auto &slot = singles[stem];
            if (tracks[0].route == Route::Vocal) slot.first = std::move(tracks[0]);
            else slot.second = std::move(tracks[0]);
        } else {
            throw DataError("token file carries more than two tracks: " + p.string());
        }
    }
    for (auto &[stem, pair] : singles) {
        if (!pair.first || !pair.second)
            throw DataError("unpaired token stream for '" + stem + "': need both .vocal.dtok and .accomp.dtok");
        corpus.push_back(tokens::align(std::move(*pair.first), std::move(*pair.second)));
    }
    return corpus;
}

}  // namespace

int cmd_eval_lm(const RunConfig &cfg) {
    std::vector<tokens::DualTrackSequence> corpus = load_token_corpus(cfg.str("tokens"));

    std::uint32_t vocab_v = corpus.front().vocal.vocab_size;
    std::uint32_t vocab_a = corpus.front().accomp.vocab_size;
    for (const auto &seq : corpus)
        if (seq.vocal.vocab_size != vocab_v || seq.accomp.vocab_size != vocab_a)
            throw DataError("token corpus mixes vocabulary sizes");
    if (vocab_v != vocab_a)
        throw DataError("per-route vocabularies differ; the PPL@1024 report needs a single S");

    std::shared_ptr<lmeval::Predictor> predictor;
    if (cfg.flag("baseline_bigram")) {
        auto vocal_lm = std::make_shared<lmeval::CountLm>(
            lmeval::train_count_lm(corpus, Route::Vocal, cfg.f64("alpha")));
        auto accomp_lm = std::make_shared<lmeval::CountLm>(
            lmeval::train_count_lm(corpus, Route::Accompaniment, cfg.f64("alpha")));
        auto dual = std::make_shared<lmeval::DualPredictor>();
        dual->vocal = vocal_lm;
        dual->accomp = accomp_lm;
        predictor = dual;
    } else {
        if (cfg.str("predictor_vocal").empty() || cfg.str("predictor_accomp").empty())
            throw ConfigError("eval-lm needs --baseline_bigram 1 or both predictor files");
        auto vocal_p = std::make_shared<lmeval::ExternalPredictor>(
            lmeval::read_logprobs(cfg.str("predictor_vocal")));
        auto accomp_p = std::make_shared<lmeval::ExternalPredictor>(
            lmeval::read_logprobs(cfg.str("predictor_accomp")));
        if (vocal_p->route != Route::Vocal)
            throw DataError("predictor_vocal file declares the wrong route");
        if (accomp_p->route != Route::Accompaniment)
            throw DataError("predictor_accomp file declares the wrong route");
        auto dual = std::make_shared<lmeval::DualPredictor>();
        dual->vocal = vocal_p;
        dual->accomp = accomp_p;
        predictor = dual;
    }

    std::int64_t tau = cfg.str("tau").empty()
                           ? lmeval::default_prefix_frames(corpus.front().vocal.rate)
                           : cfg.i64("tau");

    std::vector<std::int64_t> ks;
    for (std::int64_t k : lmeval::kDefaultTopK)
        if (k < static_cast<std::int64_t>(vocab_v)) ks.push_back(k);
    if (ks.empty()) throw DataError("vocabulary too small for any top-k column");

    lmeval::EvalReport report = lmeval::evaluate(*predictor, corpus, tau, ks);
    lmeval::write_report_csv(cfg.str("out"), report);
    return kExitOk;
}

namespace {

// Pareto input rows: name,rate,codebooks,ppl_at_1024,mel_l1 with codebooks
// written as NxK (e.g. 8x1024) or a single K.
std::vector<std::int64_t> parse_codebooks(const std::string &text) {
    std::size_t x = text.find('x');
    try {
        if (x == std::string::npos) return {std::stoll(text)};
        std::int64_t n = std::stoll(text.substr(0, x));
        std::int64_t k = std::stoll(text.substr(x + 1));
        if (n < 1) throw std::invalid_argument(text);
        return std::vector<std::int64_t>(static_cast<std::size_t>(n), k);
    } catch (const std::exception &) {
        throw DataError("bad codebook spec '" + text + "' (expected NxK)");
    }
}

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    return fields;
}

}  // namespace

int cmd_pareto(const RunConfig &cfg) {
    std::ofstream out(cfg.str("out"));
    if (!out) throw DataError("cannot open for writing: " + cfg.str("out"));
    out << "name,bitrate_kbps,ppl_at_1024,mel_l1\n";

    for (const std::string &input : cfg.positional) {
        std::ifstream in(input);
        if (!in) throw DataError("cannot open: " + input);
        std::string line;
        if (!std::getline(in, line)) throw DataError("empty pareto input: " + input);
        if (trim(line) != "name,rate,codebooks,ppl_at_1024,mel_l1")
            throw DataError(input + ": expected header name,rate,codebooks,ppl_at_1024,mel_l1");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            std::vector<std::string> fields = split_csv_line(line);
            if (fields.size() != 5)
                throw DataError(input + ":" + std::to_string(line_no) + ": expected 5 fields");
            double rate = 0.0;
            try {
                rate = std::stod(fields[1]);
            } catch (const std::exception &) {
                throw DataError(input + ":" + std::to_string(line_no) + ": bad rate");
            }
            double kbps = tokens::bitrate_kbps(rate, parse_codebooks(fields[2]));
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", kbps);
            out << fields[0] << ',' << buf << ',' << fields[3] << ',' << fields[4] << '\n';
        }
    }
    if (!out) throw DataError("write failed: " + cfg.str("out"));
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

const char *kUsage =
    "usage: duotok <command> [--config file] [--key value ...]\n"
    "commands:\n"
    "  featurize       WAV -> DTFT feature file (log-mel or chroma)\n"
    "  bestrq-targets  DTFT -> frame,target CSV from a seeded random quantizer\n"
    "  train-vq        feature manifest -> dual DTCB codebooks + training log\n"
    "  tokenize        DTFT + DTCB -> DTOK token stream\n"
    "  eval-lm         DTOK dir -> report CSV (bigram baseline or DTLP files)\n"
    "  pareto          result CSVs -> combined name,bitrate,ppl,mel CSV\n";

}  // namespace

int run(const std::vector<std::string> &args) {
    try {
        if (args.empty()) {
            std::cerr << kUsage;
            return kExitConfig;
        }
        const std::string &verb = args[0];
        std::vector<std::string> rest(args.begin() + 1, args.end());
        const std::vector<KeySpec> &known = keys_for(verb);
        RunConfig cfg = parse_run_config(rest, known, verb == "pareto");
        if (verb == "featurize") return cmd_featurize(cfg);
        if (verb == "bestrq-targets") return cmd_bestrq_targets(cfg);
        if (verb == "train-vq") return cmd_train_vq(cfg);
        if (verb == "tokenize") return cmd_tokenize(cfg);
        if (verb == "eval-lm") return cmd_eval_lm(cfg);
        return cmd_pareto(cfg);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int run(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace duotok::cli
