#include "eigengame/checkpoint.hpp"

#include "eigengame/data_source.hpp"

#include <json.hpp>

#include <fstream>

namespace eigengame {

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  write_matrix_binary(path, c.v_hat);
  nlohmann::json meta = {
      {"iter", c.iter}, {"alpha", c.alpha}, {"variant", c.variant}, {"seed", c.seed}};
  std::ofstream out(path + ".json");
  if (!out) throw Error(ErrorCode::io, "cannot write " + path + ".json");
  out << meta.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  Checkpoint c;
  c.v_hat = read_matrix_binary(path);
  std::ifstream in(path + ".json");
  if (!in) throw Error(ErrorCode::io, "cannot open " + path + ".json");
  try {
    const auto meta = nlohmann::json::parse(in);
    c.iter = meta.at("iter").get<std::int64_t>();
    c.alpha = meta.at("alpha").get<double>();
    c.variant = meta.at("variant").get<std::string>();
    c.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ".json: " + e.what(), 0, 0);
  }
  if (c.variant != "plain" && c.variant != "riemannian")
    throw ParseError(path + ".json: unknown variant '" + c.variant + "'", 0, 0);
  return c;
}

Checkpoint to_checkpoint(const EigenState<double>& s, std::uint64_t seed) {
  return Checkpoint{s.v_hat, s.iter, s.alpha, to_string(s.variant), seed};
}

EigenState<double> to_state(const Checkpoint& c) {
  EigenState<double> s;
  s.v_hat = c.v_hat;
  s.iter = c.iter;
  s.alpha = c.alpha;
  s.variant = c.variant == "plain" ? Variant::plain : Variant::riemannian;
  return s;
}

}  // namespace eigengame
