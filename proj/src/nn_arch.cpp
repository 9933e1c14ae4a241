#include <sstream>

#include "afglab/error.hpp"
#include "afglab/nn.hpp"

namespace afg {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Validation, "cannot parse " + what + " from '" + s + "'");
  }
}

// "A->B" pairs used by conv and dense.
std::pair<int, int> parse_arrow(const std::string& s, const std::string& what) {
  auto pos = s.find("->");
  if (pos == std::string::npos)
    fail(ErrorKind::Validation, what + " needs the form IN->OUT, got '" + s + "'");
  return {parse_int(s.substr(0, pos), what + " input"),
          parse_int(s.substr(pos + 2), what + " output")};
}

}  // namespace

ArchSpec ArchSpec::parse(const std::string& text) {
  ArchSpec arch;
  bool have_input = false;
  int conv_n = 0, relu_n = 0, pool_n = 0, dense_n = 0;
  for (const std::string& raw : split(text, ';')) {
    std::string stmt = trim(raw);
    if (stmt.empty()) continue;
    auto ts = tokens(stmt);
    const std::string& head = ts[0];
    if (head == "input") {
      if (ts.size() != 2)
        fail(ErrorKind::Validation, "input needs HxWxC, got '" + stmt + "'");
      auto parts = split(ts[1], 'x');
      if (parts.size() != 3)
        fail(ErrorKind::Validation, "input needs HxWxC, got '" + ts[1] + "'");
      arch.input = {parse_int(parts[0], "input height"),
                    parse_int(parts[1], "input width"),
                    parse_int(parts[2], "input channels")};
      have_input = true;
    } else if (head == "conv") {
      if (ts.size() < 3)
        fail(ErrorKind::Validation, "conv needs IN->OUT kK [sS] [pP]");
      LayerSpec l;
      l.kind = LayerKind::Conv;
      l.name = "conv" + std::to_string(++conv_n);
      auto [in, out] = parse_arrow(ts[1], l.name);
      l.in_ch = in;
      l.out_ch = out;
      for (std::size_t i = 2; i < ts.size(); ++i) {
        const std::string& o = ts[i];
        if (o.size() < 2)
          fail(ErrorKind::Validation, l.name + ": bad option '" + o + "'");
        int v = parse_int(o.substr(1), l.name + " option " + o);
        if (o[0] == 'k') l.kernel = v;
        else if (o[0] == 's') l.stride = v;
        else if (o[0] == 'p') l.pad = v;
        else fail(ErrorKind::Validation, l.name + ": unknown option '" + o + "'");
      }
      if (l.kernel < 1)
        fail(ErrorKind::Validation, l.name + ": kernel size missing (kK)");
      arch.layers.push_back(l);
    } else if (head == "relu") {
      LayerSpec l;
      l.kind = LayerKind::Relu;
      l.name = "relu" + std::to_string(++relu_n);
      arch.layers.push_back(l);
    } else if (head == "pool") {
      if (ts.size() != 2) fail(ErrorKind::Validation, "pool needs a window size");
      LayerSpec l;
      l.kind = LayerKind::MaxPool;
      l.name = "pool" + std::to_string(++pool_n);
      l.pool = parse_int(ts[1], l.name + " window");
      if (l.pool < 1) fail(ErrorKind::Validation, l.name + ": window must be >= 1");
      arch.layers.push_back(l);
    } else if (head == "flatten") {
      LayerSpec l;
      l.kind = LayerKind::Flatten;
      l.name = "flatten";
      arch.layers.push_back(l);
    } else if (head == "dense") {
      if (ts.size() != 2) fail(ErrorKind::Validation, "dense needs IN->OUT");
      LayerSpec l;
      l.kind = LayerKind::Dense;
      l.name = "fc" + std::to_string(++dense_n);
      auto [in, out] = parse_arrow(ts[1], l.name);
      l.in_features = in;
      l.out_features = out;
      arch.layers.push_back(l);
    } else {
      fail(ErrorKind::Validation, "unknown layer '" + head + "'");
    }
  }
  if (!have_input)
    fail(ErrorKind::Validation, "architecture needs an 'input HxWxC' entry");
  if (arch.layers.empty())
    fail(ErrorKind::Validation, "architecture has no layers");
  arch.validate();
  return arch;
}

std::string ArchSpec::to_text() const {
  std::ostringstream os;
  os << "input " << input.h << "x" << input.w << "x" << input.c;
  for (const LayerSpec& l : layers) {
    os << "; ";
    switch (l.kind) {
      case LayerKind::Conv:
        os << "conv " << l.in_ch << "->" << l.out_ch << " k" << l.kernel
           << " s" << l.stride << " p" << l.pad;
        break;
      case LayerKind::Relu: os << "relu"; break;
      case LayerKind::MaxPool: os << "pool " << l.pool; break;
      case LayerKind::Flatten: os << "flatten"; break;
      case LayerKind::Dense:
        os << "dense " << l.in_features << "->" << l.out_features;
        break;
    }
  }
  return os.str();
}

void ArchSpec::validate() const {
  if (input.h < 1 || input.w < 1 || input.c < 1)
    fail(ErrorKind::Validation, "input shape must be positive");
  Shape3 cur = input;
  bool flat = false;
  std::int64_t flat_count = 0;
  std::string producer = "input";
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        if (flat)
          fail(ErrorKind::Validation, l.name + " cannot follow flatten");
        if (l.in_ch != cur.c)
          fail(ErrorKind::Validation,
               l.name + " expects " + std::to_string(l.in_ch) +
                   " input channels but " + producer + " produces " +
                   std::to_string(cur.c));
        if (l.stride < 1 || l.pad < 0)
          fail(ErrorKind::Validation, l.name + ": bad stride/pad");
        int eh = cur.h + 2 * l.pad - l.kernel;
        int ew = cur.w + 2 * l.pad - l.kernel;
        if (eh < 0 || ew < 0)
          fail(ErrorKind::Validation,
               l.name + ": kernel " + std::to_string(l.kernel) +
                   " larger than padded input " + cur.str());
        if (eh % l.stride != 0 || ew % l.stride != 0)
          fail(ErrorKind::Validation,
               l.name + ": stride does not tile the input exactly");
        cur = {eh / l.stride + 1, ew / l.stride + 1, l.out_ch};
        producer = l.name;
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
        if (flat)
          fail(ErrorKind::Validation, l.name + " cannot follow flatten");
        if (cur.h % l.pool != 0 || cur.w % l.pool != 0)
          fail(ErrorKind::Validation,
               l.name + ": window " + std::to_string(l.pool) +
                   " does not divide " + cur.str());
        cur = {cur.h / l.pool, cur.w / l.pool, cur.c};
        producer = l.name;
        break;
      case LayerKind::Flatten:
        if (flat) fail(ErrorKind::Validation, "duplicate flatten");
        flat = true;
        flat_count = cur.count();
        producer = l.name;
        break;
      case LayerKind::Dense: {
        if (!flat)
          fail(ErrorKind::Validation,
               l.name + " requires a flatten before it");
        if (l.in_features != flat_count)
          fail(ErrorKind::Validation,
               l.name + " expects " + std::to_string(l.in_features) +
                   " inputs but " + producer + " produces " +
                   std::to_string(flat_count));
        if (l.out_features < 1)
          fail(ErrorKind::Validation, l.name + ": output width must be >= 1");
        flat_count = l.out_features;
        producer = l.name;
        break;
      }
    }
  }
  if (layers.back().kind != LayerKind::Dense)
    fail(ErrorKind::Validation, "network must end in a dense layer");
}

int ArchSpec::output_width() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    if (it->kind == LayerKind::Dense) return it->out_features;
  fail(ErrorKind::Validation, "architecture has no dense layer");
}

Shape3 ArchSpec::shape_after(int layer_index) const {
  Shape3 cur = input;
  bool flat = false;
  std::int64_t flat_count = 0;
  for (int i = 0; i <= layer_index && i < static_cast<int>(layers.size()); ++i) {
    const LayerSpec& l = layers[static_cast<std::size_t>(i)];
    switch (l.kind) {
      case LayerKind::Conv:
        cur = {(cur.h + 2 * l.pad - l.kernel) / l.stride + 1,
               (cur.w + 2 * l.pad - l.kernel) / l.stride + 1, l.out_ch};
        break;
      case LayerKind::Relu: break;
      case LayerKind::MaxPool:
        cur = {cur.h / l.pool, cur.w / l.pool, cur.c};
        break;
      case LayerKind::Flatten:
        flat = true;
        flat_count = cur.count();
        break;
      case LayerKind::Dense:
        flat = true;
        flat_count = l.out_features;
        break;
    }
  }
  if (flat) return {1, 1, static_cast<int>(flat_count)};
  return cur;
}

}  // namespace afg
