#include <sstream>

#include <gtest/gtest.h>

#include "consensus_labeler/config.hpp"

using consensus::Config;
using consensus::Error;
using consensus::ErrorKind;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::state;
}

const char* kText =
    "; comment\n"
    "[world]\n"
    "ncols = 80\n"
    "cellsize = 0.25\n"
    "name = small world\n"
    "[loop]\n"
    "verbose = Yes\n";

}  // namespace

TEST(Config, ReadsTypedValues) {
  const auto c = Config::from_string(kText);
  EXPECT_TRUE(c.has("world.ncols"));
  EXPECT_FALSE(c.has("world.nrows"));
  EXPECT_EQ(c.get_int("world.ncols", 0), 80);
  EXPECT_DOUBLE_EQ(c.get_double("world.cellsize", 0.0), 0.25);
  EXPECT_EQ(c.get_string("world.name", ""), "small world");
  EXPECT_TRUE(c.get_bool("loop.verbose", false));
}

TEST(Config, MissingKeysUseFallback) {
  const auto c = Config::from_string(kText);
  EXPECT_EQ(c.get_int("world.nrows", 17), 17);
  EXPECT_DOUBLE_EQ(c.get_double("eval.depth", 1.5), 1.5);
  EXPECT_EQ(c.get_string("eval.mode", "strategy"), "strategy");
  EXPECT_FALSE(c.get_bool("eval.flag", false));
}

TEST(Config, BadValuesAreConfigErrors) {
  const auto c = Config::from_string("[a]\nx = abc\ny = 1.5\nz = maybe\n");
  EXPECT_EQ(kind_of([&] { c.get_int("a.x", 0); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { c.get_int("a.y", 0); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { c.get_double("a.x", 0); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { c.get_bool("a.z", false); }), ErrorKind::config);
}

TEST(Config, MalformedFileIsConfigError) {
  EXPECT_EQ(kind_of([] { Config::from_string("[world\nncols = 3\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { Config::from_string("[a]\nx = 1\nx = 2\n"); }), ErrorKind::config);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { Config::load("/nonexistent/dir/none.cfg"); }), ErrorKind::io);
}

TEST(Config, SetOverridesAndNeedsSection) {
  auto c = Config::from_string(kText);
  c.set("world.ncols", "40");
  c.set("eval.trees", "7");
  EXPECT_EQ(c.get_int("world.ncols", 0), 40);
  EXPECT_EQ(c.get_int("eval.trees", 0), 7);
  EXPECT_EQ(kind_of([&] { c.set("trees", "7"); }), ErrorKind::config);
}

TEST(Config, WriteRoundTrips) {
  auto c = Config::from_string(kText);
  c.set("eval.trees", "7");
  const auto again = Config::from_string(c.str());
  EXPECT_EQ(again.str(), c.str());
  EXPECT_EQ(again.get_int("world.ncols", 0), 80);
  EXPECT_EQ(again.get_string("world.name", ""), "small world");
  EXPECT_EQ(again.get_int("eval.trees", 0), 7);
}
