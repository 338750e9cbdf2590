#pragma once

#include <map>
#include <string>
#include <vector>

#include "humid/params.hpp"

namespace humid {

// On-disk snapshot: model weights plus whatever side data the trainer needs
// to reproduce inference exactly (configuration, profile normalization).
struct Checkpoint {
    std::map<std::string, std::string> meta;            // config key=value
    ParamStore params;
    std::map<std::string, std::vector<double>> extras;  // e.g. profile mean/std
};

// Binary, bit-exact round trip: doubles are stored as raw IEEE-754 bytes.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace humid
