#include "eigengame/checkpoint.hpp"
#include "eigengame/data_source.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace eigengame;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const char* env = std::getenv("EG_TMP");
  fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "eg_tests";
  p /= "io";
  fs::create_directories(p);
  return p;
}

std::string write_text(const std::string& name, const std::string& body) {
  const auto p = tmp_dir() / name;
  std::ofstream(p) << body;
  return p.string();
}

std::string write_bytes(const std::string& name, const std::vector<unsigned char>& bytes) {
  const auto p = tmp_dir() / name;
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return p.string();
}

}  // namespace

TEST(Csv, ThreeByTwo) {
  const auto ds = load_dataset(write_text("a.csv", "1,2\n3,4\n5,6"), DatasetFormat::csv);
  EXPECT_EQ(ds.rows(), 3);
  EXPECT_EQ(ds.cols(), 2);
  EXPECT_EQ(ds.data()(2, 1), 6.0);
}

TEST(Csv, HeaderDetected) {
  const MatrixXd m = read_matrix_csv(write_text("h.csv", "x,y\n1,2\n3,4\n"));
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 0), 3.0);
}

TEST(Csv, MalformedReportsPosition) {
  try {
    read_matrix_csv(write_text("bad.csv", "1,2\n3,oops\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
  EXPECT_THROW(read_matrix_csv(write_text("ragged.csv", "1,2\n3\n")), ParseError);
}

TEST(Csv, NonFiniteIsDataError) {
  try {
    read_matrix_csv(write_text("nan.csv", "1,2\n3,inf\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::data);
  }
}

TEST(Csv, RoundTrip) {
  MatrixXd m(2, 3);
  m << 0.1, -2.5, 1e-300, 3.0, 1.0 / 3.0, 7;
  const auto p = (tmp_dir() / "rt.csv").string();
  write_matrix_csv(p, m);
  EXPECT_EQ(read_matrix_csv(p), m);
}

TEST(Binary, RoundTrip) {
  MatrixXd m = MatrixXd::Random(5, 4);
  const auto p = (tmp_dir() / "rt.bin").string();
  write_matrix_binary(p, m);
  EXPECT_EQ(read_matrix_binary(p), m);
  EXPECT_EQ(format_from_path(p), DatasetFormat::binary);
  EXPECT_EQ(format_from_path("x.csv"), DatasetFormat::csv);
}

TEST(Binary, LayoutIsLittleEndianRowMajor) {
  std::vector<unsigned char> b = {'E', 'G', 'D', 'T', 1, 0, 0, 0, 2, 0, 0, 0};
  for (double x : {1.5, -2.0}) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  const MatrixXd m = read_matrix_binary(write_bytes("layout.bin", b));
  ASSERT_EQ(m.rows(), 1);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_EQ(m(0, 0), 1.5);
  EXPECT_EQ(m(0, 1), -2.0);
}

TEST(Binary, ZeroRowsIsEmptyDataset) {
  try {
    read_matrix_binary(write_bytes("empty.bin", {'E', 'G', 'D', 'T', 0, 0, 0, 0, 3, 0, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_dataset);
  }
}

TEST(Binary, TruncatedAndBadMagic) {
  EXPECT_THROW(read_matrix_binary(write_bytes("trunc.bin", {'E', 'G', 'D', 'T', 1, 0, 0, 0, 1, 0, 0, 0, 1})),
               ParseError);
  EXPECT_THROW(read_matrix_binary(write_bytes("magic.bin", {'X', 'G', 'D', 'T', 1, 0, 0, 0, 1, 0, 0, 0})),
               ParseError);
}

TEST(DataSource, Centering) {
  MatrixXd x(2, 2);
  x << 1, 0, 3, 0;
  const DataSource ds(x, 1, 0, true);
  MatrixXd expect(2, 2);
  expect << -1, 0, 1, 0;
  EXPECT_EQ(ds.data(), expect);
  EXPECT_EQ(DataSource(x, 1, 0).data(), x);
}

TEST(DataSource, Validation) {
  EXPECT_THROW(DataSource(MatrixXd(0, 3), 1, 0), Error);
  EXPECT_THROW(DataSource(MatrixXd::Ones(3, 3), 0, 0), Error);
  MatrixXd x = MatrixXd::Ones(2, 2);
  x(1, 1) = std::nan("");
  EXPECT_THROW(DataSource(x, 1, 0), Error);
}

TEST(DataSource, StreamDeterminism) {
  const DataSource a(MatrixXd::Random(40, 3), 8, 99);
  const DataSource b(a.data(), 8, 99);
  auto sa = a.stream(3);
  auto sb = b.stream(3);
  auto sc = a.stream(4);
  bool differs = false;
  for (int t = 0; t < 100; ++t) {
    const auto ia = sa.next_indices();
    EXPECT_EQ(ia, sb.next_indices());
    EXPECT_EQ(ia.size(), 8u);
    differs = differs || ia != sc.next_indices();
  }
  EXPECT_TRUE(differs);
}

TEST(DataSource, BatchShape) {
  const DataSource ds(MatrixXd::Random(10, 4), 3, 1);
  auto s = ds.stream();
  const MatrixXd b = s.next();
  EXPECT_EQ(b.rows(), 3);
  EXPECT_EQ(b.cols(), 4);
  EXPECT_EQ(ds.with_batch_size(5).stream().next().rows(), 5);
}

TEST(DataSource, FullPassEpochs) {
  const DataSource ds(MatrixXd::Random(7, 2), 3, 0, false, SamplingMode::full_pass);
  auto s = ds.stream();
  EXPECT_EQ(s.next_indices(), (std::vector<Index>{0, 1, 2}));
  EXPECT_EQ(s.next_indices(), (std::vector<Index>{3, 4, 5}));
  EXPECT_EQ(s.next_indices(), (std::vector<Index>{6}));
  EXPECT_EQ(s.next_indices(), (std::vector<Index>{0, 1, 2}));
}

TEST(Checkpoint, RoundTrip) {
  EigenState<double> s;
  s.v_hat = MatrixXd::Random(6, 2);
  s.iter = 42;
  s.alpha = 1e-4;
  s.variant = Variant::plain;
  const auto p = (tmp_dir() / "ck.bin").string();
  save_checkpoint(p, to_checkpoint(s, 17));
  const auto c = load_checkpoint(p);
  EXPECT_EQ(c.v_hat, s.v_hat);
  EXPECT_EQ(c.iter, 42);
  EXPECT_EQ(c.alpha, 1e-4);
  EXPECT_EQ(c.variant, "plain");
  EXPECT_EQ(c.seed, 17u);
  const auto back = to_state(c);
  EXPECT_EQ(back.variant, Variant::plain);
  EXPECT_TRUE(fs::exists(p + ".json"));
}
