#pragma once

// Dataset ingestion: parsers for the published file layouts, NaN
// interpolation, boundary-respecting segmentation, and the fixed
// train/validation/test splits.

#include <string>
#include <vector>

#include "rtsf/data/store.hpp"
#include "rtsf/data/stream.hpp"

namespace rtsf::data {

struct PreparedDataset {
    std::string dataset_id;
    size_t window = 0;
    size_t stride = 0;
    size_t class_count = 0;
    double sample_rate_hz = 0.0;
    std::vector<rot::ChannelInfo> channels;
    std::vector<std::string> class_names;
    std::vector<Segment> train, validation, test;
    NormStats norm;  // from the training split only
};

std::vector<std::string> supported_datasets();

// kind is one of supported_datasets(); workers caps per-file parse
// parallelism. Normalisation with train statistics is already applied.
PreparedDataset prepare_dataset(const std::string& kind, const std::string& root,
                                size_t workers = 1);

// Pre-segmented six-channel dataset with its original subject-based
// train/test split; validation subjects 7 and 22 are carved out of train.
PreparedDataset load_ucihar(const std::string& root);

// Raw continuous recordings, parsed per the published column layouts.
std::vector<LabeledStream> ingest_raw(const std::string& kind,
                                      const std::vector<std::string>& files);

SegmentStore make_store(const PreparedDataset& ds, const std::string& split_tag);

}  // namespace rtsf::data
