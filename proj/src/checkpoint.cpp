#include "fadi/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "fadi/error.hpp"

namespace fadi {

void Checkpoint::add(std::string name, const Matrix& value, bool frozen) {
    if (has(name)) throw DataError("checkpoint: duplicate parameter '" + name + "'");
    params.push_back({std::move(name), value, frozen});
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& p : params) {
        if (p.name == name) return true;
    }
    return false;
}

const NamedParam& Checkpoint::find(const std::string& name) const {
    for (const auto& p : params) {
        if (p.name == name) return p;
    }
    throw DataError("checkpoint: missing parameter '" + name + "'");
}

const Matrix& Checkpoint::get(const std::string& name, std::size_t rows, std::size_t cols) const {
    const Matrix& m = find(name).value;
    require_shape(m, rows, cols, "checkpoint parameter '" + name + "'");
    return m;
}

nlohmann::json Checkpoint::to_json() const {
    nlohmann::json j;
    j["format"] = "fadi-checkpoint";
    j["version"] = 1;
    j["params"] = nlohmann::json::array();
    for (const auto& p : params) {
        j["params"].push_back({{"name", p.name},
                               {"rows", p.value.rows()},
                               {"cols", p.value.cols()},
                               {"frozen", p.frozen},
                               {"data", p.value.values()}});
    }
    j["meta"] = meta;
    return j;
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
    Checkpoint c;
    try {
        if (j.at("format").get<std::string>() != "fadi-checkpoint") throw DataError("checkpoint: wrong format tag");
        if (j.at("version").get<int>() != 1) throw DataError("checkpoint: unsupported version");
        for (const auto& p : j.at("params")) {
            const auto rows = p.at("rows").get<std::size_t>();
            const auto cols = p.at("cols").get<std::size_t>();
            auto data = p.at("data").get<std::vector<double>>();
            const auto name = p.at("name").get<std::string>();
            if (data.size() != rows * cols) {
                throw DataError("checkpoint: parameter '" + name + "' has " + std::to_string(data.size()) +
                                " values for shape " + std::to_string(rows) + "x" + std::to_string(cols));
            }
            c.add(name, Matrix(rows, cols, std::move(data)), p.at("frozen").get<bool>());
        }
        c.meta = j.value("meta", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint JSON: ") + e.what());
    }
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << ckpt.to_json().dump(1) << '\n';
    if (!out) throw DataError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint '" + path + "': " + e.what());
    }
    return Checkpoint::from_json(j);
}

}  // namespace fadi
