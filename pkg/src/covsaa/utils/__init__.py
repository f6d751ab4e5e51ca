"""
@File       : __init__.py
@Description: 

@Time       : 2026/01/06 20:20
@Author     : hcy18
"""
