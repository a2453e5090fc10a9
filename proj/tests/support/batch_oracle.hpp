#pragma once

// Offline reference for fusion: sees every event at once, sorts them by
// (t_start, source priority, seq), resolves partial hypotheses, segments the
// transcript in one pass and attaches cues segment by segment. Written
// without reusing the engine's segmentation or attachment code.

#include <string>
#include <vector>

#include "capfuse/cue_model.hpp"
#include "capfuse/fusion.hpp"
#include "capfuse/ingest.hpp"

namespace oracle {

std::vector<capfuse::CaptionSegment> batch_fuse(const std::vector<capfuse::IngestEvent>& events,
                                                const capfuse::FusionConfig& config = {});

/// `t0..t1|verbose text` per final segment.
std::vector<std::string> batch_transcript(const std::vector<capfuse::IngestEvent>& events,
                                          const capfuse::FusionConfig& config = {});

}  // namespace oracle
