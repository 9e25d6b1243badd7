#include "ewn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "ewn/rng.hpp"
#include "ewn/svm.hpp"

namespace ewn {

int LabeledSet::num_classes() const {
  if (binary) return 2;
  int k = 0;
  for (int v : y) k = std::max(k, v + 1);
  return k;
}

LabeledSet gen_simple_traj() {
  LabeledSet s;
  s.name = "simple-traj";
  s.m = 1;
  s.d = 2;
  s.X = {2.0, 1.0};
  s.y = {1};
  return s;
}

LabeledSet gen_xor() {
  LabeledSet s;
  s.name = "xor";
  s.m = 4;
  s.d = 2;
  s.X = {1, 1, -1, -1, 1, -1, -1, 1};
  s.y = {1, 1, -1, -1};
  return s;
}

LabeledSet gen_linsep(int m, int d, double margin, uint64_t seed) {
  if (m < 2 || d < 2) throw std::invalid_argument("gen_linsep: need m >= 2, d >= 2");
  Rng rng(seed);
  LabeledSet s;
  s.name = "lin-sep";
  s.seed = seed;
  s.d = d;
  std::vector<double> w(d);
  double wn = 0;
  for (auto& c : w) c = rng.normal();
  for (auto c : w) wn += c * c;
  wn = std::sqrt(wn);
  for (auto& c : w) c /= wn;
  while (s.m < m) {
    std::vector<double> x(d);
    for (auto& c : x) c = rng.uniform(-1.0, 1.0);
    double t = 0;
    for (int i = 0; i < d; ++i) t += w[i] * x[i];
    if (std::fabs(t) < margin) continue;
    // keep both labels represented
    int lbl = t > 0 ? 1 : -1;
    s.X.insert(s.X.end(), x.begin(), x.end());
    s.y.push_back(lbl);
    ++s.m;
  }
  bool has_pos = false, has_neg = false;
  for (int v : s.y) (v > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) return gen_linsep(m, d, margin, seed + 0x9e3779b9u);
  MarginSolution sol = max_margin_oracle(s);  // throws if not separable
  if (sol.margin < margin)
    throw std::logic_error("gen_linsep: oracle margin below requested margin");
  return s;
}

namespace {

struct Seg {
  double x0, y0, x1, y1;
};

// seven-segment skeletons in a unit box, y grows downward
const Seg kSegs[7] = {
    {0.15, 0.05, 0.85, 0.05},  // A top
    {0.85, 0.05, 0.85, 0.50},  // B top-right
    {0.85, 0.50, 0.85, 0.95},  // C bottom-right
    {0.15, 0.95, 0.85, 0.95},  // D bottom
    {0.15, 0.50, 0.15, 0.95},  // E bottom-left
    {0.15, 0.05, 0.15, 0.50},  // F top-left
    {0.15, 0.50, 0.85, 0.50},  // G middle
};

const int kDigitSegs[10] = {
    0b0111111,  // 0: ABCDEF
    0b0000110,  // 1: BC
    0b1011011,  // 2: ABDEG
    0b1001111,  // 3: ABCDG
    0b1100110,  // 4: BCFG
    0b1101101,  // 5: ACDFG
    0b1111101,  // 6: ACDEFG
    0b0000111,  // 7: ABC
    0b1111111,  // 8
    0b1101111,  // 9: ABCDFG
};

double seg_dist(const Seg& s, double px, double py) {
  double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  double wx = px - s.x0, wy = py - s.y0;
  double t = (vx * wx + vy * wy) / (vx * vx + vy * vy);
  t = std::clamp(t, 0.0, 1.0);
  double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

uint32_t read_be32(std::istream& in, const std::string& path, long offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw std::runtime_error(path + ": truncated at offset " + std::to_string(offset));
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | b[3];
}

}  // namespace

LabeledSet gen_digits(int m, uint64_t seed) {
  const int side = 28;
  Rng rng(seed);
  LabeledSet s;
  s.name = "digits";
  s.seed = seed;
  s.d = side * side;
  s.m = m;
  s.binary = false;
  s.X.resize(static_cast<size_t>(m) * s.d);
  s.y.resize(m);
  for (int i = 0; i < m; ++i) {
    int digit = i % 10;  // class-balanced by construction
    s.y[i] = digit;
    double cx = rng.uniform(-0.08, 0.08), cy = rng.uniform(-0.08, 0.08);
    double sc = rng.uniform(0.85, 1.12);
    double rot = rng.uniform(-0.12, 0.12);
    double cr = std::cos(rot), sr = std::sin(rot);
    double thick = rng.uniform(0.055, 0.075);
    double* img = s.X.data() + static_cast<size_t>(i) * s.d;
    for (int py = 0; py < side; ++py) {
      for (int px = 0; px < side; ++px) {
        // map pixel center back into glyph coordinates
        double u = (px + 0.5) / side - 0.5, v = (py + 0.5) / side - 0.5;
        double gu = (cr * u + sr * v) / sc - cx + 0.5;
        double gv = (-sr * u + cr * v) / sc - cy + 0.5;
        double dmin = 1e9;
        for (int si = 0; si < 7; ++si)
          if (kDigitSegs[digit] & (1 << si)) dmin = std::min(dmin, seg_dist(kSegs[si], gu, gv));
        double val = std::clamp((thick - dmin) / thick + 0.35, 0.0, 1.0);
        val += rng.uniform(0.0, 0.12);
        img[py * side + px] = std::clamp(val, 0.0, 1.0);
      }
    }
  }
  return s;
}

LabeledSet load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                          int subset, const std::vector<int>* classes, uint64_t seed) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw std::runtime_error("cannot open " + images_path);
  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw std::runtime_error("cannot open " + labels_path);

  uint32_t magic_i = read_be32(fi, images_path, 0);
  if (magic_i != 0x00000803u)
    throw std::runtime_error(images_path + ": bad magic at offset 0 (expected 0x00000803)");
  uint32_t n_img = read_be32(fi, images_path, 4);
  uint32_t rows = read_be32(fi, images_path, 8);
  uint32_t cols = read_be32(fi, images_path, 12);

  uint32_t magic_l = read_be32(fl, labels_path, 0);
  if (magic_l != 0x00000801u)
    throw std::runtime_error(labels_path + ": bad magic at offset 0 (expected 0x00000801)");
  uint32_t n_lbl = read_be32(fl, labels_path, 4);
  if (n_img != n_lbl)
    throw std::runtime_error("image/label count mismatch: " + std::to_string(n_img) + " vs " +
                             std::to_string(n_lbl));

  size_t pix = static_cast<size_t>(rows) * cols;
  std::vector<unsigned char> ibuf(pix * n_img), lbuf(n_lbl);
  fi.read(reinterpret_cast<char*>(ibuf.data()), static_cast<std::streamsize>(ibuf.size()));
  if (!fi) throw std::runtime_error(images_path + ": truncated image payload");
  fl.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()));
  if (!fl) throw std::runtime_error(labels_path + ": truncated label payload");

  std::vector<int> keep;
  keep.reserve(n_img);
  std::set<int> want;
  if (classes) want.insert(classes->begin(), classes->end());
  for (uint32_t i = 0; i < n_img; ++i)
    if (!classes || want.count(lbuf[i])) keep.push_back(static_cast<int>(i));

  if (subset > 0) {
    // deterministic stratified sample: quota per class, seeded pick order
    std::vector<std::vector<int>> by_class(256);
    for (int i : keep) by_class[lbuf[i]].push_back(i);
    int ncls = 0;
    for (auto& v : by_class)
      if (!v.empty()) ++ncls;
    if (ncls == 0) throw std::runtime_error("no examples match requested classes");
    int quota = subset / ncls, extra = subset % ncls;
    Rng rng(seed);
    std::vector<int> picked;
    for (auto& v : by_class) {
      if (v.empty()) continue;
      rng.shuffle(v);
      int q = quota + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
      if (static_cast<int>(v.size()) < q)
        throw std::runtime_error("not enough examples in a class for stratified subset");
      picked.insert(picked.end(), v.begin(), v.begin() + q);
    }
    rng.shuffle(picked);
    keep = picked;
  }

  LabeledSet s;
  s.name = "mnist";
  s.seed = seed;
  s.binary = false;
  s.d = static_cast<int>(pix);
  s.m = static_cast<int>(keep.size());
  s.X.resize(static_cast<size_t>(s.m) * pix);
  s.y.resize(s.m);
  for (int r = 0; r < s.m; ++r) {
    int i = keep[r];
    s.y[r] = lbuf[i];
    const unsigned char* src = ibuf.data() + static_cast<size_t>(i) * pix;
    double* dst = s.X.data() + static_cast<size_t>(r) * pix;
    for (size_t p = 0; p < pix; ++p) dst[p] = src[p] / 255.0;
  }
  return s;
}

void save_idx(const LabeledSet& set, const std::string& images_path,
              const std::string& labels_path) {
  int side = static_cast<int>(std::lround(std::sqrt(double(set.d))));
  if (side * side != set.d) throw std::invalid_argument("save_idx: non-square images");
  auto be32 = [](std::ostream& o, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    o.write(reinterpret_cast<char*>(b), 4);
  };
  std::ofstream fi(images_path, std::ios::binary);
  be32(fi, 0x00000803u);
  be32(fi, set.m);
  be32(fi, side);
  be32(fi, side);
  for (size_t i = 0; i < set.X.size(); ++i) {
    unsigned char p = static_cast<unsigned char>(std::lround(std::clamp(set.X[i], 0.0, 1.0) * 255));
    fi.write(reinterpret_cast<char*>(&p), 1);
  }
  if (!fi) throw std::runtime_error("cannot write " + images_path);
  std::ofstream fl(labels_path, std::ios::binary);
  be32(fl, 0x00000801u);
  be32(fl, set.m);
  for (int v : set.y) {
    unsigned char b = static_cast<unsigned char>(v);
    fl.write(reinterpret_cast<char*>(&b), 1);
  }
  if (!fl) throw std::runtime_error("cannot write " + labels_path);
}

void save_csv(const LabeledSet& set, const std::string& path) {
  std::ofstream f(path);
  for (int c = 0; c < set.d; ++c) f << "x" << (c + 1) << ",";
  f << "y\n";
  char buf[32];
  for (int i = 0; i < set.m; ++i) {
    for (int c = 0; c < set.d; ++c) {
      snprintf(buf, sizeof buf, "%.17g", set.row(i)[c]);
      f << buf << ",";
    }
    f << set.y[i] << "\n";
  }
  if (!f) throw std::runtime_error("cannot write " + path);
}

LabeledSet load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  int d = static_cast<int>(std::count(line.begin(), line.end(), ','));
  LabeledSet s;
  s.name = path;
  s.d = d;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tok;
    for (int c = 0; c < d; ++c) {
      std::getline(is, tok, ',');
      s.X.push_back(std::stod(tok));
    }
    std::getline(is, tok, ',');
    s.y.push_back(std::stoi(tok));
    ++s.m;
  }
  s.binary = true;
  for (int v : s.y)
    if (v != 1 && v != -1) s.binary = false;
  return s;
}

uint64_t image_checksum(const LabeledSet& set, int index) {
  uint64_t h = 1469598103934665603ull;
  const double* img = set.row(index);
  for (int p = 0; p < set.d; ++p) {
    unsigned char b = static_cast<unsigned char>(std::lround(std::clamp(img[p], 0.0, 1.0) * 255));
    h = (h ^ b) * 1099511628211ull;
  }
  return h;
}

}  // namespace ewn
