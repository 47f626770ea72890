/*
 * Copyright 2026 The EmLog Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * EmLog C interface.
 *
 * Every call returns an emlog_status. On failure a message for the calling
 * thread is available from emlog_last_error() until the next call. Strings
 * returned through char** out-parameters are owned by the caller and are
 * released with emlog_free().
 */

#ifndef EMLOG_EMLOG_H
#define EMLOG_EMLOG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(EMLOG_BUILDING_LIBRARY)
#define EMLOG_API __attribute__((visibility("default")))
#else
#define EMLOG_API
#endif

typedef enum emlog_status {
  EMLOG_OK = 0,
  EMLOG_E_INVALID_PARAMETER = 1,
  EMLOG_E_KEY_UNAVAILABLE = 2,
  EMLOG_E_BLOCK_FULL = 3,
  EMLOG_E_KEY_MISUSE = 4,
  EMLOG_E_PARSE = 5,
  EMLOG_E_AUTH = 6,
  EMLOG_E_IO = 7,
  EMLOG_E_EXISTS = 8,
  EMLOG_E_NEGOTIATION = 9,
  EMLOG_E_REPLAY = 10,
  EMLOG_E_INTEGRITY = 11,
  EMLOG_E_CRYPTO = 12,
  EMLOG_E_NOT_FOUND = 13,
  EMLOG_E_INTERNAL = 99
} emlog_status;

typedef enum emlog_role { EMLOG_ROLE_DEVICE = 1, EMLOG_ROLE_VERIFIER = 2, EMLOG_ROLE_AUTHORITY = 3 } emlog_role;

typedef struct emlog_device emlog_device;
typedef struct emlog_identity emlog_identity;

EMLOG_API const char* emlog_version(void);
EMLOG_API const char* emlog_status_name(emlog_status status);
EMLOG_API const char* emlog_last_error(void);
EMLOG_API void emlog_free(void* p);

/* ---- identities (verifier, authority) ---- */

/* Creates a sealed identity directory. issuer_dir may be NULL (self-signed). */
EMLOG_API emlog_status emlog_identity_create(const char* dir, emlog_role role, const char* issuer_dir);
EMLOG_API emlog_status emlog_identity_open(const char* dir, emlog_identity** out);
EMLOG_API emlog_status emlog_identity_certificate_pem(const emlog_identity* id, char** pem);
EMLOG_API void emlog_identity_close(emlog_identity* id);

/* 32 random bytes for provisioning full-mode verifiers. */
EMLOG_API emlog_status emlog_provision_key_create(const char* path);

/* ---- device ---- */

/* epoch_seconds 0 disables time-based flushing. issuer_dir may be NULL. */
EMLOG_API emlog_status emlog_device_init(const char* dir, uint32_t c, uint32_t m, const char* issuer_dir,
                                         uint32_t epoch_seconds, emlog_device** out);
/* Recovers after a crash and resumes after the committed state. */
EMLOG_API emlog_status emlog_device_open(const char* dir, uint32_t epoch_seconds, emlog_device** out);
EMLOG_API emlog_status emlog_device_append(emlog_device* dev, const uint8_t* data, size_t len);
EMLOG_API emlog_status emlog_device_flush(emlog_device* dev);
EMLOG_API emlog_status emlog_device_tick(emlog_device* dev, int* flushed);
EMLOG_API emlog_status emlog_device_stats_json(const emlog_device* dev, char** json);
EMLOG_API emlog_status emlog_device_certificate_pem(const emlog_device* dev, char** pem);
/* Seals the root logging key for a verifier holding the provisioning key. */
EMLOG_API emlog_status emlog_device_export_rlk(const emlog_device* dev, const char* provision_key_path,
                                               const char* out_path);
/* Newline-delimited input from path ("-" for standard input). source is one of
   apache, snort, dmesg, generic. Flushes at end of input. */
EMLOG_API emlog_status emlog_device_ingest(emlog_device* dev, const char* path, const char* source,
                                           int drop_when_full, size_t queue_capacity, char** report_json);

typedef void (*emlog_listening_fn)(uint16_t port, void* ctx);
typedef void (*emlog_session_fn)(const char* session_json, void* ctx);

/* Serves max_sessions sessions (0: forever), one at a time. port 0 picks a
   free port, reported through on_listening before the first accept. */
EMLOG_API emlog_status emlog_device_serve(emlog_device* dev, const char* host, uint16_t port,
                                          const char* anchors_dir, uint32_t max_sessions,
                                          emlog_listening_fn on_listening, emlog_session_fn on_session, void* ctx);
/* Drops anything not yet committed, as a power loss would. */
EMLOG_API void emlog_device_close(emlog_device* dev);

/* ---- verifier ---- */

#define EMLOG_RANGE_OPEN 0xFFFFFFFFu

/* Fetches blocks [first, last] and writes an archive. The transfer outcome
   (blocks, clamp, alarm, error) is described in report_json. */
EMLOG_API emlog_status emlog_fetch(const emlog_identity* verifier, const char* anchors_dir, const char* host,
                                   uint16_t port, uint32_t first, uint32_t last, const char* archive_path,
                                   char** report_json);

/* Verification. *verdict_ok is 1 when the report has no findings. Full mode
   needs the root logging key: from rlk_path + provision_key_path when given,
   otherwise (local store only) from the store's own sealed secret. */
EMLOG_API emlog_status emlog_verify_store(const char* dir, int full, const char* rlk_path,
                                          const char* provision_key_path, int* verdict_ok, char** report_json);
/* anchors_dir may be NULL, in which case the archive's device certificate is
   taken as given and the report says so. */
EMLOG_API emlog_status emlog_verify_archive(const char* archive_path, const char* anchors_dir, int full,
                                            const char* rlk_path, const char* provision_key_path, int* verdict_ok,
                                            char** report_json);

/* ---- tools ---- */

EMLOG_API emlog_status emlog_gen_synthetic(const char* path, uint64_t count, double mean, double stddev,
                                           uint64_t seed);
/* config_json may be NULL for defaults. *passed reflects the trend and
   storage checks. */
EMLOG_API emlog_status emlog_bench(const char* config_json, int* passed, char** report_json);
/* Format and protocol constants. */
EMLOG_API emlog_status emlog_formats_json(char** json);

#ifdef __cplusplus
}
#endif

#endif /* EMLOG_EMLOG_H */
