#include "dhrn/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dhrn {

namespace {

constexpr const char* kMagic = "dhrn-checkpoint 1";

nlohmann::json projection_json(const Constraint& c) {
    if (const auto* box = std::get_if<BoxConstraint>(&c)) {
        nlohmann::json bounds = nlohmann::json::array();
        for (double b : box->bound) bounds.push_back(std::isinf(b) ? nlohmann::json("inf") : nlohmann::json(b));
        return {{"type", "box"}, {"bound", bounds}};
    }
    if (const auto* q = std::get_if<QuadraticConstraint>(&c)) return {{"type", "quadratic"}, {"sigma", q->sigma}, {"max_risk", q->max_risk}};
    return {{"type", "none"}};
}

Constraint projection_from_json(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "none") return {};
    if (type == "box") {
        BoxConstraint box;
        for (const auto& b : j.at("bound")) box.bound.push_back(b.is_string() ? kInf : b.get<double>());
        return box;
    }
    if (type == "quadratic") return QuadraticConstraint{j.at("sigma").get<std::vector<double>>(), j.at("max_risk").get<double>()};
    throw std::invalid_argument("unknown projection type '" + type + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const PolicyNet& net, const std::string& rng_state,
                     const std::string& config_digest) {
    nlohmann::json d;
    d["architecture"] = to_string(net.architecture());
    d["hidden"] = net.hidden();
    d["features"] = {{"mids", net.shape().features.mids}, {"aux", net.shape().features.aux}};
    d["n_inputs"] = net.n_inputs();
    d["n_outputs"] = net.n_outputs();
    d["n_steps"] = net.n_steps();
    d["feature_mean"] = net.feature_mean();
    d["feature_scale"] = net.feature_scale();
    d["persistent"] = net.persistent();
    d["projection"] = projection_json(net.projection());
    d["n_params"] = net.n_params();
    d["rng_state"] = rng_state;
    d["config_digest"] = config_digest;

    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file.string());
    out << kMagic << '\n' << d.dump() << '\n';
    out.write(reinterpret_cast<const char*>(net.params().data()),
              static_cast<std::streamsize>(net.n_params() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::string magic, descriptor;
    std::getline(in, magic);
    if (magic != kMagic) throw std::invalid_argument(file.string() + ": not a dhrn checkpoint (bad header)");
    std::getline(in, descriptor);
    const auto d = nlohmann::json::parse(descriptor);

    NetShape shape;
    shape.arch = architecture_from_string(d.at("architecture").get<std::string>());
    shape.hidden = d.at("hidden").get<std::vector<int>>();
    shape.features.mids = d.at("features").at("mids").get<bool>();
    shape.features.aux = d.at("features").at("aux").get<bool>();
    const auto n_params = d.at("n_params").get<std::size_t>();
    Eigen::VectorXd params(static_cast<Eigen::Index>(n_params));
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n_params * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(n_params * sizeof(double)))
        throw std::invalid_argument(file.string() + ": truncated parameter block");

    Checkpoint out;
    out.net = PolicyNet::assemble(shape, d.at("n_inputs").get<std::size_t>(), d.at("n_outputs").get<std::size_t>(),
                                  d.at("n_steps").get<std::size_t>(), d.at("feature_mean").get<std::vector<double>>(),
                                  d.at("feature_scale").get<std::vector<double>>(),
                                  d.at("persistent").get<std::vector<bool>>(), projection_from_json(d.at("projection")),
                                  std::move(params));
    out.rng_state = d.value("rng_state", "");
    out.config_digest = d.value("config_digest", "");
    return out;
}

}  // namespace dhrn
