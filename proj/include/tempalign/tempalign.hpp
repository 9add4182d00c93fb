#pragma once

#include "tempalign/caption.hpp"
#include "tempalign/http_backend.hpp"
#include "tempalign/interval.hpp"
#include "tempalign/metadata.hpp"
#include "tempalign/scene.hpp"
#include "tempalign/segment_bank.hpp"
#include "tempalign/signal.hpp"
#include "tempalign/steam.hpp"
#include "tempalign/wav.hpp"
