// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

#include "voxlift/pipeline.hpp"

int main() {
    std::printf("voxlift cli placeholder\n");
    return 0;
}
