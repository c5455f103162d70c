#include <gtest/gtest.h>

#include "odlc/util/log.hpp"

int main(int argc, char** argv) {
  testing::InitGoogleTest(&argc, argv);
  odlc::log::init("off");
  return RUN_ALL_TESTS();
}
