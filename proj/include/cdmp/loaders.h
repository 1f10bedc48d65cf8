#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdmp/datasets.h"

namespace cdmp {

enum class DatasetId { UciHar, MotionSense, Hapt };

struct DatasetInfo {
  DatasetId id;
  std::string name;  // "ucihar", "motionsense", "hapt"
  std::size_t num_classes;
  std::size_t expected_subjects;
  std::vector<std::string> class_names;
};

const DatasetInfo& dataset_info(DatasetId id);
DatasetId dataset_from_name(const std::string& name);

/// UCI HAR "total_acc" signals from both the train and test partitions,
/// pooled. Each 128-sample row is cropped to its first `layout.length`
/// samples. Labels are mapped from 1..6 to 0..5.
WindowSet load_ucihar(const std::filesystem::path& root, const WindowLayout& layout = {});

/// One recording per (subject, trial) CSV under A_DeviceMotion_data, carrying
/// the userAcceleration triplet and the folder's activity as a constant label.
std::vector<RawRecording> load_motionsense(const std::filesystem::path& root);

/// One recording per RawData/acc_expXX_userYY.txt. Samples are labelled from
/// labels.txt intervals (1-based, inclusive bounds); activity ids 1..12 map to
/// 0..11 and samples outside every interval stay unlabelled.
std::vector<RawRecording> load_hapt(const std::filesystem::path& root);

/// A dataset reduced to windows: every window for self-supervision, with a
/// label wherever the window carries a single activity.
struct PreparedDataset {
  DatasetId id = DatasetId::UciHar;
  WindowLayout layout;
  WindowSet windows;
  std::vector<std::filesystem::path> source_files;  // relative to the dataset root

  const DatasetInfo& info() const { return dataset_info(id); }
};

PreparedDataset prepare_dataset(DatasetId id, const std::filesystem::path& root,
                                const WindowLayout& layout = {});

/// Files a loader reads, relative to the root, in lexicographic order.
std::vector<std::filesystem::path> dataset_source_files(DatasetId id,
                                                        const std::filesystem::path& root);

}  // namespace cdmp
