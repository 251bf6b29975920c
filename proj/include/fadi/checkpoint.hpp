#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fadi/matrix.hpp"

namespace fadi {

struct NamedParam {
    std::string name;
    Matrix value;
    bool frozen = false;
};

/// {"format":"fadi-checkpoint","version":1,"params":[{name,rows,cols,frozen,data}],"meta":{...}}
struct Checkpoint {
    std::vector<NamedParam> params;
    nlohmann::json meta = nlohmann::json::object();

    void add(std::string name, const Matrix& value, bool frozen);
    bool has(const std::string& name) const;
    /// Throws DataError if absent or not rows x cols.
    const Matrix& get(const std::string& name, std::size_t rows, std::size_t cols) const;
    /// Throws DataError if absent.
    const NamedParam& find(const std::string& name) const;

    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fadi
