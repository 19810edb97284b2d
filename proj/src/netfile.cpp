// SPDX-License-Identifier: Apache-2.0
#include "fenn/netfile.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace fenn::io {

namespace {

void put32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 | static_cast<std::uint32_t>(b[2]) << 16 |
           static_cast<std::uint32_t>(b[3]) << 24;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    return out;
}

void expect_magic(std::istream& in, const char* magic, const std::string& path) {
    char m[4];
    if (!in.read(m, 4) || std::memcmp(m, magic, 4) != 0) throw FormatError(fmt::format("{}: not an {} file", path, magic));
    if (get32(in, path) != 1) throw FormatError(path + ": unsupported version");
}

} // namespace

Matrix16 read_fmat(const std::string& path) {
    auto in = open_in(path);
    expect_magic(in, "FMAT", path);
    const auto rows = get32(in, path), cols = get32(in, path);
    Matrix16 m(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& x : m.data) {
        unsigned char b[2];
        if (!in.read(reinterpret_cast<char*>(b), 2)) throw FormatError(path + ": truncated");
        x = static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0] | b[1] << 8));
    }
    return m;
}

void write_fmat(const std::string& path, const Matrix16& m) {
    auto out = open_out(path);
    out.write("FMAT", 4);
    put32(out, 1);
    put32(out, static_cast<std::uint32_t>(m.rows));
    put32(out, static_cast<std::uint32_t>(m.cols));
    for (auto x : m.data) {
        const auto u = static_cast<std::uint16_t>(x);
        const char b[2] = {static_cast<char>(u & 0xFF), static_cast<char>(u >> 8)};
        out.write(b, 2);
    }
}

net::SpikeTrain read_fspk(const std::string& path) {
    auto in = open_in(path);
    expect_magic(in, "FSPK", path);
    const auto shape = get32(in, path), T = get32(in, path);
    net::SpikeTrain s = net::make_train(static_cast<int>(shape), static_cast<int>(T));
    for (auto& step : s.steps)
        for (auto& w : step) w = get32(in, path);
    return s;
}

void write_fspk(const std::string& path, const net::SpikeTrain& s) {
    auto out = open_out(path);
    out.write("FSPK", 4);
    put32(out, 1);
    put32(out, static_cast<std::uint32_t>(s.shape));
    put32(out, static_cast<std::uint32_t>(s.timesteps()));
    for (const auto& step : s.steps)
        for (auto w : step) put32(out, w);
}

net::SpikeTrain read_events(std::istream& in, int shape, int T) {
    net::SpikeTrain s = net::make_train(shape, T);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        long t = 0, n = 0;
        if (!(ls >> t)) continue;
        if (!(ls >> n)) throw FormatError(fmt::format("line {}: expected \"t neuron_id\"", lineno));
        if (n < 0 || n >= shape) throw FormatError(fmt::format("line {}: neuron {} outside [0, {})", lineno, n, shape));
        if (t < 0) throw FormatError(fmt::format("line {}: negative step", lineno));
        if (t >= T) continue;
        s.set(static_cast<int>(t), static_cast<int>(n));
    }
    return s;
}

void write_events(std::ostream& out, const net::SpikeTrain& s) {
    for (int t = 0; t < s.timesteps(); ++t)
        for (int n = 0; n < s.shape; ++n)
            if (s.spiked(t, n)) out << t << ' ' << n << '\n';
}

net::SpikeTrain read_spikes(const std::string& path, int shape, int T) {
    auto in = open_in(path);
    char m[4] = {};
    in.read(m, 4);
    if (in.gcount() == 4 && std::memcmp(m, "FSPK", 4) == 0) {
        net::SpikeTrain s = read_fspk(path);
        if (s.shape != shape) throw FormatError(fmt::format("{}: shape {} but the input has {}", path, s.shape, shape));
        s.steps.resize(static_cast<std::size_t>(T), std::vector<std::uint32_t>(static_cast<std::size_t>(s.words())));
        return s;
    }
    in.clear();
    in.seekg(0);
    return read_events(in, shape, T);
}

// ---- network description ------------------------------------------------

namespace {

using nlohmann::json;

QFormat format_of(const json& j, const std::string& where) {
    try {
        return parse_format(j.get<std::string>());
    } catch (const std::exception& e) {
        throw net::ModelError(where + ": " + e.what());
    }
}

std::string text_of(const json& j) {
    if (!j.is_array()) return j.get<std::string>();
    std::string s;
    for (const auto& line : j) s += line.get<std::string>() + "\n";
    return s;
}

net::Population population_of(const json& j) {
    const auto name = j.at("name").get<std::string>();
    const int shape = j.at("shape").get<int>();
    net::Population p;
    if (j.value("model", "") == "LIF") {
        const QFormat f = j.contains("format") ? format_of(j["format"], name) : s7_8_sat;
        p = net::lif_population(name, shape, j.value("tau_mem", 20.0), j.value("v_thresh", 1.0), f, j.value("bias", 0.0));
    } else {
        p.name = name;
        p.shape = shape;
        p.kernel = text_of(j.at("kernel"));
    }
    if (j.contains("params"))
        for (const auto& [k, v] : j["params"].items())
            p.params[k] = {v.at("value").get<double>(), format_of(v.at("format"), name + "." + k)};
    if (j.contains("vars"))
        for (const auto& [k, v] : j["vars"].items()) {
            net::Variable var;
            if (auto old = p.vars.find(k); old != p.vars.end()) var = old->second;
            if (v.contains("format")) var.format = format_of(v["format"], name + "." + k);
            if (v.contains("init")) {
                if (v["init"].is_array()) var.init_raw = v["init"].get<std::vector<std::int16_t>>();
                else var.init = v["init"].get<double>();
            }
            const auto place = v.value("place", "auto");
            var.place = place == "vmem" ? net::PlaceHint::Vmem : place == "llm" ? net::PlaceHint::Llm : net::PlaceHint::Auto;
            p.vars[k] = var;
        }
    p.event = j.value("event", p.event);
    return p;
}

} // namespace

NetworkFile load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    const std::filesystem::path dir = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& f) { return std::filesystem::path(f).is_absolute() ? f : (dir / f).string(); };
    NetworkFile nf;
    try {
        const json j = json::parse(in);
        for (const auto& p : j.value("populations", json::array())) nf.model.populations.push_back(population_of(p));
        for (const auto& i : j.value("inputs", json::array())) {
            nf.model.inputs.push_back({i.at("name").get<std::string>(), i.at("shape").get<int>()});
            if (i.contains("spikes")) nf.input_files[i["name"].get<std::string>()] = resolve(i["spikes"].get<std::string>());
        }
        for (const auto& c : j.value("connections", json::array())) {
            net::Connection con;
            con.src = c.at("src").get<std::string>();
            con.dst = c.at("dst").get<std::string>();
            con.name = c.value("name", con.src + "_" + con.dst);
            con.target = c.value("target", "I");
            con.encoding = kernels::parse_encoding(c.value("encoding", "dense"));
            con.format = c.contains("format") ? format_of(c["format"], con.name) : s7_8_sat;
            con.weights = read_fmat(resolve(c.at("weights").get<std::string>()));
            if (c.contains("delays")) con.delays = read_fmat(resolve(c["delays"].get<std::string>()));
            con.n_delay = c.value("n_delay", 1);
            const auto place = c.value("place", "auto");
            con.place = place == "vmem" ? net::WeightPlace::Vmem : place == "external" ? net::WeightPlace::External : net::WeightPlace::Auto;
            nf.model.connections.push_back(std::move(con));
        }
        nf.record = j.value("record", std::vector<std::string>{});
        nf.steps = j.value("steps", 0);
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    return nf;
}

} // namespace fenn::io
