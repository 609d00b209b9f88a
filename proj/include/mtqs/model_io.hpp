#pragma once

#include <json.hpp>
#include <string>

#include "mtqs/bath_models.hpp"
#include "mtqs/gkls_model.hpp"
#include "mtqs/propagation.hpp"

namespace mtqs {

using Json = nlohmann::json;

/// Fetches an object key, naming it (and its context) when absent.
const Json& require_key(const Json& node, const std::string& key,
                        const std::string& context);

/// Matrices are arrays of rows; every entry is a [re, im] pair.
Matrix parse_matrix(const Json& node, const std::string& context);
Json matrix_to_json(const Matrix& m);
Json complex_to_json(const Complex& z);

/// Named operators of the standard dictionary (pauli_x/y/z, sigma_plus,
/// sigma_minus, projector_0, projector_1, identity) or an inline matrix.
/// pauli_z = diag(1, -1): basis index 0 is the +1 eigenstate.
Matrix parse_operator(const Json& node, int dim, const std::string& context);

/// Named states (ground, excited, plus_x, minus_x, plus_y, minus_y,
/// maximally_mixed) or an inline density matrix.
Matrix parse_state(const Json& node, int dim, const std::string& context);

SystemModel parse_system(const Json& node);
GKLSModel parse_model(const Json& node);
SpectralDensity parse_spectral_density(const Json& node,
                                       const std::string& base_dir = "");
MultiTimeRequest parse_request(const Json& node, int d_s);

/// Either an explicit JSON array of reals or {"t_max": .., "points": ..}
/// for a uniform grid from 0.
std::vector<double> parse_time_grid(const Json& node,
                                    const std::string& context);

Json load_json_file(const std::string& path);

}  // namespace mtqs
