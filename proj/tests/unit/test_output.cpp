#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "homoglab/output.hpp"

using namespace homoglab;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("homoglab_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Fnv1a64, PublishedVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(OutputHeader, HashTracksPhysicsNotDestination) {
  const auto a = parse_config("[output]\ndirectory = \"one\"\n");
  const auto b = parse_config("[output]\ndirectory = \"two\"\ntimings = true\n");
  const auto c = parse_config("[contrast]\ndelta = 0.5\n");
  EXPECT_EQ(make_header(a, "sweep").config_hash, make_header(b, "sweep").config_hash);
  EXPECT_NE(make_header(a, "sweep").config_hash, make_header(c, "sweep").config_hash);
}

TEST(OutputHeader, CsvBlockIsCommentedAndComplete) {
  const auto h = make_header(parse_config(""), "cell");
  const auto block = csv_header_block(h);
  std::istringstream in(block);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind("# ", 0), 0u) << line;
    ++lines;
  }
  EXPECT_GE(lines, 4);
  EXPECT_NE(block.find(h.config_hash), std::string::npos);
  EXPECT_NE(block.find("limit_spectrum="), std::string::npos);
  EXPECT_NE(block.find("tolerances"), std::string::npos);
  const auto j = header_json(h);
  EXPECT_EQ(j["config_hash"], h.config_hash);
  EXPECT_EQ(j["modules"].size(), module_versions().size());
}

TEST(OutputWriter, WritesHeadersAndJsonMember) {
  const auto dir = fresh_dir("writer");
  OutputWriter w(dir, make_header(parse_config(""), "unit"));
  w.write_csv("t.csv", "x,y\n1,2\n");
  w.write_json("t.json", {{"value", 3}});
  const auto csv = slurp(dir / "t.csv");
  EXPECT_EQ(csv.rfind("# command: unit", 0), 0u);
  EXPECT_NE(csv.find("x,y\n1,2\n"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "t.json"));
  EXPECT_EQ(j["value"], 3);
  EXPECT_EQ(j["header"]["command"], "unit");
}

TEST(OutputWriter, ConcurrentWritersLeaveCompleteFiles) {
  const auto dir = fresh_dir("concurrent");
  OutputWriter w(dir, make_header(parse_config(""), "unit"));
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t)
    pool.emplace_back([&, t] {
      for (int k = 0; k < 10; ++k)
        w.write_csv("f" + std::to_string(t) + "_" + std::to_string(k) + ".csv", std::string(1000, 'a' + t) + "\n");
    });
  for (auto& th : pool) th.join();
  EXPECT_EQ(w.written().size(), 80u);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    EXPECT_NE(e.path().extension(), ".tmp");
    ++files;
  }
  EXPECT_EQ(files, 80u);
}

TEST(OutputWriter, IdenticalInputsGiveIdenticalBytes) {
  const auto d1 = fresh_dir("same1"), d2 = fresh_dir("same2");
  const auto cfg = parse_config("");
  OutputWriter a(d1, make_header(cfg, "x")), b(d2, make_header(cfg, "x"));
  a.write_json("r.json", {{"v", 0.1}});
  b.write_json("r.json", {{"v", 0.1}});
  EXPECT_EQ(slurp(d1 / "r.json"), slurp(d2 / "r.json"));
}
