#include "navstack/image_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace navstack {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

RawFrame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  if (next_token(in) != "P6") throw InvalidFrame(path.string() + ": not a binary PPM (P6)");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (maxval != 255) throw InvalidFrame(path.string() + ": only maxval 255 is supported");
  RawFrame f(w, h);
  in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.rgb.size())) {
    throw InvalidFrame(path.string() + ": truncated pixel data");
  }
  f.validate();
  return f;
}

void write_ppm(const std::filesystem::path& path, const RawFrame& frame) {
  frame.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
}

std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::vector<CorpusEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CorpusEntry e;
    int label = -1;
    if (!(ls >> e.filename >> label) || (label != 0 && label != 1)) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected '<filename> <0|1>'");
    }
    e.blurred = label == 1;
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.filename << ' ' << (e.blurred ? 1 : 0) << '\n';
}

}  // namespace navstack
