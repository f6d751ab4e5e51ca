"""
@File       : __init__.py
@Description: CLI 子命令处理器

@Time       : 2026/01/16 10:01
@Author     : hcy18
"""
