#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "spectre/t3d_io.hpp"

using namespace spectre;

TEST(T3D, RoundTripIsBitExact) {
  Tensor3 t(3, 4, 5);
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = nd(gen);
  t(0, 0, 0) = -0.0;
  t(1, 0, 0) = 1e-310;  // subnormal
  std::stringstream ss;
  write_t3d(ss, t);
  const Tensor3 r = read_t3d(ss);
  ASSERT_EQ(r.dims(), t.dims());
  EXPECT_EQ(std::memcmp(r.data(), t.data(), sizeof(double) * static_cast<std::size_t>(t.size())), 0);
}

TEST(T3D, HeaderLayout) {
  Tensor3 t(2, 1, 1);
  std::stringstream ss;
  write_t3d(ss, t);
  const std::string s = ss.str();
  ASSERT_GE(s.size(), 16u);
  EXPECT_EQ(s.substr(0, 11), "SPECTRE-T3D");
  EXPECT_EQ(s[11], '\0');
  const auto nl = s.find('\n', 16);
  ASSERT_NE(nl, std::string::npos);
  const auto header = nlohmann::json::parse(s.substr(16, nl - 16));
  EXPECT_EQ(header["dims"], nlohmann::json({2, 1, 1}));
  EXPECT_EQ(header["dtype"], "f64");
  EXPECT_EQ(s.size(), nl + 1 + 16);
}

TEST(T3D, RejectsBadMagic) {
  Tensor3 t(2, 2, 2);
  std::stringstream ss;
  write_t3d(ss, t);
  std::string s = ss.str();
  s[0] = 'X';
  std::stringstream bad(s);
  EXPECT_THROW(read_t3d(bad), FormatError);
}

TEST(T3D, RejectsDimsPayloadMismatch) {
  Tensor3 t(2, 2, 2);
  std::stringstream ss;
  write_t3d(ss, t);
  std::string s = ss.str();
  std::stringstream shorter(s.substr(0, s.size() - 8));
  EXPECT_THROW(read_t3d(shorter), FormatError);
  std::stringstream longer(s + std::string(8, '\0'));
  EXPECT_THROW(read_t3d(longer), FormatError);
}

TEST(T3D, RejectsNonPositiveDims) {
  std::string s(kT3DMagic, 16);
  s += R"J({"dims":[2,0,1],"dtype":"f64","order":"column-major (i1 fastest, then i2, then i3)"})J";
  s += '\n';
  std::stringstream ss(s);
  EXPECT_THROW(read_t3d(ss), FormatError);
}
