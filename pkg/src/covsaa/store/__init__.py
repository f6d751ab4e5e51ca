"""
@File       : __init__.py
@Description: 磁盘格式：CSV 与纯文本算例文件

@Time       : 2026/01/14 16:00
@Author     : hcy18
"""
