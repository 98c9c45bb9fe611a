####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     logger.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+
#
####################################################################################################

"""
Run logging for lipops. Log lines never reach a report file, so a run's reports stay byte-identical whatever
the verbosity, log file or worker count.
"""

import contextlib
import logging
import os
import time
import traceback

LOGGER_NAME = "lipops"
LEVEL_NAMES = ["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"]
PLAIN_FORMAT = "%(message)s"
# worker threads interleave, so their lines carry the thread name
THREADED_FORMAT = "%(threadName)s [%(asctime)s] %(message)s"
FORMAT_ENVIRONMENT = "LIPOPS_LOG_FORMAT"


def add_logging_args(arg_parser):
    verbosity = arg_parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbosity", help="Logging level, one of {}".format(LEVEL_NAMES),
                           choices=LEVEL_NAMES, metavar="<LEVEL>", default="WARNING")
    verbosity.add_argument("--silence", help="No log output at all (reports are still written)",
                           action="store_true", default=False)
    arg_parser.add_argument("--logfile", help="Copy log output to this file", metavar="<LOG_FILE>", default=None)
    arg_parser.add_argument("--logmode", help="Log file mode, 'a' to append or 'w' to overwrite", choices=["a", "w"],
                            default="w")


def choose_format(num_workers=1):
    """ $LIPOPS_LOG_FORMAT wins; otherwise plain lines for one worker and thread-tagged lines for several """
    configured = os.environ.get(FORMAT_ENVIRONMENT)
    if configured:
        return configured
    return THREADED_FORMAT if num_workers > 1 else PLAIN_FORMAT


class Log:
    def __init__(self, verbosity, logfile=None, logmode="w", format=PLAIN_FORMAT):
        logging.basicConfig(format=format)
        self.silent = verbosity == 0
        self.verbosity = logging.CRITICAL if self.silent else verbosity
        self.format = format
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(self.verbosity)
        self.logger_file_handler = None
        self.set_logfile(logfile, logmode)

    def __enter__(self):
        return self

    def __exit__(self, type, value, traceback):
        self.remove_logfile()

    def set_logfile(self, logfile, logmode="a"):
        self.remove_logfile()
        if logfile:
            self.logger_file_handler = logging.FileHandler(logfile, mode=logmode)
            self.logger_file_handler.setFormatter(logging.Formatter(self.format))
            self.logger_file_handler.setLevel(self.verbosity)
            self.logger.addHandler(self.logger_file_handler)

    def remove_logfile(self):
        if self.logger_file_handler:
            self.logger.removeHandler(self.logger_file_handler)
            self.logger_file_handler.close()
            self.logger_file_handler = None

    def debug(self, msg, *args, **kwargs):
        if not self.silent:
            self.logger.debug(msg, *args, **kwargs)

    def info(self, msg, *args, **kwargs):
        if not self.silent:
            self.logger.info(msg, *args, **kwargs)

    def warning(self, msg, *args, **kwargs):
        if not self.silent:
            self.logger.warning(msg, *args, **kwargs)

    def error(self, msg, *args, **kwargs):
        if not self.silent:
            self.logger.error(msg, *args, **kwargs)

    def get_verbose(self):
        return self.logger.getEffectiveLevel() <= logging.INFO and not self.silent

    @contextlib.contextmanager
    def timed(self, label):
        """ Logs '<label>: started' and '<label>: <seconds>s' at INFO around the block """
        self.info("{}: started".format(label))
        start = time.perf_counter()
        try:
            yield
        finally:
            self.info("{}: {:.3f}s".format(label, time.perf_counter() - start))

    def exception(self, error_info):
        """ One ERROR line naming the lipops error, the stack at DEBUG only """
        error_type, value, stack = error_info
        self.error("### Exception: {}: {}".format(error_type.__name__, value))
        for line in traceback.format_tb(stack):
            self.debug(line.strip())


_logger = None


def initialized():
    return _logger is not None


def init(verbosity="WARNING", logfile=None, logmode="w", format=PLAIN_FORMAT):
    global _logger
    if _logger is not None:
        _logger.remove_logfile()
    _logger = Log(verbosity, logfile, logmode, format)
    return _logger


def setup(args=None):
    """ Set up the run log from parsed cli arguments (--verbosity, --silence, --logfile, --logmode, --threads) """
    if args is None:
        return init("WARNING", format=choose_format())
    verbosity = 0 if args.silence else args.verbosity
    return init(verbosity, args.logfile, args.logmode, choose_format(getattr(args, "threads", 1)))


def get():
    global _logger
    if _logger is None:
        _logger = setup()
    return _logger
