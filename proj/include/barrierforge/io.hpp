#pragma once

#include "barrierforge/composer.hpp"

#include "json.hpp"

namespace barrierforge {

using json = nlohmann::json;

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json to_json(const MatrixXd& m);  // nested rows
MatrixXd matrix_from_json(const json& j);

json to_json(const Polynomial& p);  // [{"exps": [...], "coef": c}, ...]
Polynomial polynomial_from_json(const json& j, int nvars);
json to_json(const PolyMatrix& p);  // rows of entries
PolyMatrix polymatrix_from_json(const json& j, int nvars);

json to_json(const StorageCertificate& c);
StorageCertificate certificate_from_json(const json& j);
// canonical text: same certificate, same bytes
std::string dump_certificate(const StorageCertificate& c);

json to_json(const SdpSettings& s);
// keys present in j override base
SdpSettings sdp_settings_from_json(const json& j, SdpSettings base = {});

// {kind, N, dim, weight} or {kind: "custom", dims, blocks: [[to, from, weight], ...]}
json to_json(const Topology& t);
Topology topology_from_json(const json& j);

json read_json(const std::string& path);
void write_json(const std::string& path, const json& j);
void write_text(const std::string& path, const std::string& text);

}  // namespace barrierforge
