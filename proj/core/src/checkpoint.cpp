#include <cstdio>
#include <fstream>
#include <sstream>

#include "uda/error.hpp"
#include "uda/models.hpp"

namespace uda {

namespace {

constexpr const char* kMagic = "udakit-checkpoint";

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", t(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

Tensor read_tensor(std::istream& in, const std::string& expected) {
  std::string tag, name;
  std::size_t rows = 0, cols = 0;
  in >> tag >> name >> rows >> cols;
  if (!in || tag != "tensor" || name != expected) {
    throw ParseError("checkpoint: expected tensor '" + expected + "', found '" + name + "'");
  }
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    std::string tok;
    in >> tok;
    char* end = nullptr;
    v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0') throw ParseError("checkpoint: bad value in '" + name + "'");
  }
  return Tensor(rows, cols, std::move(data));
}

void write_spec(std::ostream& out, const char* name, const LayerSpec& s) {
  out << "mlp " << name << ' ' << s.widths.size();
  for (std::size_t w : s.widths) out << ' ' << w;
  out << '\n';
}

LayerSpec read_spec(std::istream& in, const char* expected) {
  std::string tag, name;
  std::size_t n = 0;
  in >> tag >> name >> n;
  if (!in || tag != "mlp" || name != expected) {
    throw ParseError(std::string("checkpoint: expected mlp '") + expected + "'");
  }
  LayerSpec s;
  s.widths.resize(n);
  for (auto& w : s.widths) in >> w;
  if (!in) throw ParseError("checkpoint: truncated layer spec");
  s.validate(expected);
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "step " << c.step << '\n';
  out << "rng " << (c.rng_state.empty() ? "-" : c.rng_state) << '\n';
  write_spec(out, "ef", c.bundle.ef.spec);
  write_spec(out, "h", c.bundle.h.spec);
  write_spec(out, "d", c.bundle.d.spec);
  const auto names = c.bundle.param_names();
  const auto params = c.bundle.params();
  for (std::size_t i = 0; i < params.size(); ++i) write_tensor(out, names[i], *params[i]);
  out << "end\n";
  if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw ParseError("checkpoint: '" + path + "' is not a checkpoint");
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  std::string tag;
  in >> tag >> c.step;
  if (tag != "step") throw ParseError("checkpoint: missing step");
  in >> tag;
  if (tag != "rng") throw ParseError("checkpoint: missing rng");
  in >> std::ws;
  std::getline(in, c.rng_state);
  if (c.rng_state == "-") c.rng_state.clear();

  const LayerSpec ef = read_spec(in, "ef");
  const LayerSpec h = read_spec(in, "h");
  const LayerSpec d = read_spec(in, "d");
  c.bundle = init_bundle(ef, h, d, 0);
  const auto names = c.bundle.param_names();
  auto params = c.bundle.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = read_tensor(in, names[i]);
    if (t.shape() != params[i]->shape()) {
      throw ParseError("checkpoint: tensor '" + names[i] + "' has shape " + t.shape().str() +
                       ", expected " + params[i]->shape().str());
    }
    *params[i] = std::move(t);
  }
  in >> tag;
  if (tag != "end") throw ParseError("checkpoint: missing end marker");
  return c;
}

}  // namespace uda
