// SPDX-License-Identifier: Apache-2.0
#include "attnvar/config.hpp"

#include "attnvar/model.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace attnvar {
namespace {

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::logic_error("config: number formatting failed");
    return std::string(buf, end);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }

std::string fmt_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(seeds[i]);
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v, int base = 10) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return out;
}

bool parse_onoff(const std::string& key, const std::string& v) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw std::invalid_argument("config: " + key + " must be on or off, got " + v);
}

std::vector<std::uint64_t> parse_seeds(const std::string& v) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_u64("seeds", trim(item)));
    return out;
}

} // namespace

void TrainConfig::validate() const {
    auto positive = [](const char* key, auto v) {
        if (!(v > 0)) throw std::invalid_argument(std::string("config: ") + key + " must be positive");
    };
    positive("hidden", hidden);
    positive("embed", embed);
    positive("batch", batch);
    positive("lr", lr);
    positive("acc_init", acc_init);
    positive("eps", eps);
    positive("beam", beam);
    positive("max_decode_len", max_decode_len);
    positive("clip_norm", clip_norm);
    positive("val_interval", val_interval);
    positive("patience", patience);
    if (vocab <= 4) throw std::invalid_argument("config: vocab must exceed the 4 reserved ids");
    if (pretrain_iters < 0 || finetune_iters < 0)
        throw std::invalid_argument("config: iteration budgets must be >= 0");
    if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("config: lambdas must be >= 0");
    if (val_examples < 0) throw std::invalid_argument("config: val_examples must be >= 0");
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
    model::gate_form_from(gate_form); // throws on unknown form
}

std::string TrainConfig::echo() const {
    std::string out;
    auto kv = [&out](const char* key, const std::string& value) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    };
    kv("hidden", std::to_string(hidden));
    kv("embed", std::to_string(embed));
    kv("vocab", std::to_string(vocab));
    kv("batch", std::to_string(batch));
    kv("lr", fmt(lr));
    kv("acc_init", fmt(acc_init));
    kv("pretrain_iters", std::to_string(pretrain_iters));
    kv("finetune_iters", std::to_string(finetune_iters));
    kv("lambda1", fmt(lambda1));
    kv("lambda2", fmt(lambda2));
    kv("eps", fmt(eps));
    kv("gate_form", gate_form);
    kv("beam", std::to_string(beam));
    kv("max_decode_len", std::to_string(max_decode_len));
    kv("block_trigrams", block_trigrams ? "on" : "off");
    kv("clip_norm", fmt(clip_norm));
    kv("seed", fmt(seed));
    kv("seeds", fmt_seeds(seeds));
    kv("val_interval", std::to_string(val_interval));
    kv("val_examples", std::to_string(val_examples));
    kv("patience", std::to_string(patience));
    kv("vocab_fingerprint", fmt_hex(vocab_fingerprint));
    return out;
}

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig cfg;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value, got: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "hidden") cfg.hidden = parse_int(key, value);
        else if (key == "embed") cfg.embed = parse_int(key, value);
        else if (key == "vocab") cfg.vocab = parse_int(key, value);
        else if (key == "batch") cfg.batch = parse_int(key, value);
        else if (key == "lr") cfg.lr = parse_double(key, value);
        else if (key == "acc_init") cfg.acc_init = parse_double(key, value);
        else if (key == "pretrain_iters") cfg.pretrain_iters = parse_int(key, value);
        else if (key == "finetune_iters") cfg.finetune_iters = parse_int(key, value);
        else if (key == "lambda1") cfg.lambda1 = parse_double(key, value);
        else if (key == "lambda2") cfg.lambda2 = parse_double(key, value);
        else if (key == "eps") cfg.eps = parse_double(key, value);
        else if (key == "gate_form") cfg.gate_form = value;
        else if (key == "beam") cfg.beam = parse_int(key, value);
        else if (key == "max_decode_len") cfg.max_decode_len = parse_int(key, value);
        else if (key == "block_trigrams") cfg.block_trigrams = parse_onoff(key, value);
        else if (key == "clip_norm") cfg.clip_norm = parse_double(key, value);
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "seeds") cfg.seeds = parse_seeds(value);
        else if (key == "val_interval") cfg.val_interval = parse_int(key, value);
        else if (key == "val_examples") cfg.val_examples = parse_int(key, value);
        else if (key == "patience") cfg.patience = parse_int(key, value);
        else if (key == "vocab_fingerprint") cfg.vocab_fingerprint = parse_u64(key, value, 16);
        else throw std::invalid_argument("config: unknown key: " + key);
    }
    cfg.validate();
    return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace attnvar
