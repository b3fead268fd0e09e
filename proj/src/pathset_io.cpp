#include "dhrn/pathset_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dhrn {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary arrays are written in native little-endian order");

void write_f64(const fs::path& file, std::span<const double> values) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<double> read_f64(const fs::path& file) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0) throw std::runtime_error(file.string() + ": size is not a multiple of 8");
    std::vector<double> v(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("read failed: " + file.string());
    return v;
}

namespace {

json instrument_to_json(const InstrumentSpec& s) {
    json j{{"id", s.id}, {"kind", to_string(s.kind)}};
    if (s.relative_strike) j["relative_strike"] = *s.relative_strike;
    if (s.maturity_steps) j["maturity_steps"] = *s.maturity_steps;
    return j;
}

InstrumentSpec instrument_from_json(const json& j) {
    InstrumentSpec s;
    s.id = j.at("id").get<std::string>();
    s.kind = instrument_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("relative_strike")) s.relative_strike = j["relative_strike"].get<double>();
    if (j.contains("maturity_steps")) s.maturity_steps = j["maturity_steps"].get<int>();
    return s;
}

}  // namespace

void save_pathset(const PathSet& paths, const fs::path& dir, const std::string& config_digest) {
    fs::create_directories(dir);
    const auto& d = paths.data();
    json meta{{"format", "dhrn-pathset"},
              {"version", 1},
              {"world", d.world},
              {"n_paths", d.n_paths},
              {"n_steps", d.n_steps},
              {"step_dt", d.step_dt},
              {"seed", d.seed},
              {"n_instruments", paths.n_instruments()},
              {"aux_names", d.aux_names}};
    json inst = json::array();
    for (const auto& step : d.instruments) {
        json row = json::array();
        for (const auto& s : step) row.push_back(instrument_to_json(s));
        inst.push_back(std::move(row));
    }
    meta["instruments"] = std::move(inst);
    if (!config_digest.empty()) meta["config_digest"] = config_digest;
    std::ofstream(dir / "meta.json") << meta.dump(1) << '\n';
    write_f64(dir / "spot.f64", d.spot);
    write_f64(dir / "mids.f64", d.mids);
    write_f64(dir / "marks.f64", d.marks);
    write_f64(dir / "aux.f64", d.aux);
}

PathSet load_pathset(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw std::runtime_error("missing " + (dir / "meta.json").string());
    const json meta = json::parse(in);
    if (meta.value("format", "") != "dhrn-pathset" || meta.value("version", 0) != 1)
        throw std::runtime_error(dir.string() + ": not a version 1 path set");
    PathSet::Data d;
    d.world = meta.at("world").get<std::string>();
    d.n_paths = meta.at("n_paths").get<std::size_t>();
    d.n_steps = meta.at("n_steps").get<std::size_t>();
    d.step_dt = meta.at("step_dt").get<double>();
    d.seed = meta.at("seed").get<std::uint64_t>();
    d.aux_names = meta.at("aux_names").get<std::vector<std::string>>();
    for (const auto& row : meta.at("instruments")) {
        std::vector<InstrumentSpec> step;
        for (const auto& j : row) step.push_back(instrument_from_json(j));
        d.instruments.push_back(std::move(step));
    }
    d.spot = read_f64(dir / "spot.f64");
    d.mids = read_f64(dir / "mids.f64");
    d.marks = read_f64(dir / "marks.f64");
    d.aux = read_f64(dir / "aux.f64");
    return PathSet(std::move(d));
}

void export_spot_csv(const PathSet& paths, const fs::path& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + file.string());
    std::fprintf(f, "path");
    for (std::size_t t = 0; t <= paths.n_steps(); ++t) std::fprintf(f, ",s_%zu", t);
    std::fprintf(f, "\n");
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        std::fprintf(f, "%zu", p);
        for (std::size_t t = 0; t <= paths.n_steps(); ++t) std::fprintf(f, ",%.17g", paths.spot(p, t));
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

void export_instruments_csv(const PathSet& paths, const fs::path& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + file.string());
    std::fprintf(f, "path,step,instrument,mid,mark\n");
    for (std::size_t p = 0; p < paths.n_paths(); ++p)
        for (std::size_t t = 0; t < paths.n_steps(); ++t)
            for (std::size_t i = 0; i < paths.n_instruments(); ++i)
                std::fprintf(f, "%zu,%zu,%s,%.17g,%.17g\n", p, t, paths.instruments(t)[i].id.c_str(),
                             paths.mid(p, t, i), paths.mark(p, t, i));
    std::fclose(f);
}

}  // namespace dhrn
